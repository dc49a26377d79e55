use edei_core::rng::{keyed, Stream};
use edei_net::layers::{CrossAttention, DeformAlign};
use edei_net::model::{is_fusion_param, InputVars, Trace};
use edei_net::params::{Builder, ParamStore};
use edei_net::{count_parameters, Ablation, EdeiNet, Graph, ModelConfig, ModelInput, Tensor};
use rand::Rng;

fn rand_tensor(shape: [usize; 4], seed: u64, lo: f64, hi: f64) -> Tensor<f64> {
    let mut r = keyed(seed, Stream::Test, 7, 0);
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| r.random_range(lo..hi)).collect())
}

fn small() -> ModelConfig {
    ModelConfig {
        base_channels: 8,
        num_scales: 2,
        attn_heads: 2,
        dcn_groups: 2,
        blocks_per_scale: 1,
        ..ModelConfig::default()
    }
}

fn input(n: usize, size: usize, seed: u64) -> ModelInput<f64> {
    ModelInput {
        short: rand_tensor([n, 3, size, size], seed, 0.0, 0.3),
        long: rand_tensor([n, 3, size, size], seed + 1, 0.2, 1.0),
        vox_deblur: rand_tensor([n, 6, size, size], seed + 2, -2.0, 2.0),
        vox_enhance: rand_tensor([n, 6, size, size], seed + 3, -2.0, 2.0),
    }
}

#[test]
fn zero_heads_give_the_identity() {
    let net = EdeiNet::<f64>::new(&small(), 4).unwrap();
    let x = input(2, 16, 1);
    let p = net.predict(&x).unwrap();
    assert_eq!(p.deblurred, x.long);
    assert_eq!(p.enhanced, x.short);
    assert_eq!(p.fused, x.short);
}

#[test]
fn outputs_keep_the_input_shape_even_when_padded() {
    let mut net = EdeiNet::<f64>::new(&small(), 4).unwrap();
    net.params_mut().randomize(3, 0.1);
    let x = input(1, 18, 2).crop(0, 0, 18, 13);
    let p = net.predict(&x).unwrap();
    for t in [&p.deblurred, &p.enhanced, &p.fused] {
        assert_eq!(t.shape(), [1, 3, 18, 13]);
    }
}

#[test]
fn mismatched_voxels_are_rejected() {
    let net = EdeiNet::<f64>::new(&small(), 4).unwrap();
    let mut x = input(1, 16, 1);
    x.vox_deblur = Tensor::zeros([1, 5, 16, 16]);
    assert!(net.predict(&x).is_err());
}

#[test]
fn zero_offsets_reduce_every_site_to_a_plain_conv() {
    let mut net = EdeiNet::<f32>::new(&small(), 9).unwrap();
    net.params_mut().randomize(11, 0.3);
    let offs: Vec<_> = net
        .sites()
        .iter()
        .map(|s| s.da.as_ref().unwrap().offset.clone())
        .collect();
    for c in &offs {
        for id in [c.w, c.b] {
            net.params_mut().get_mut(id).data_mut().fill(0.0);
        }
    }
    let mut trace = Trace::default();
    net.predict_traced(&input(2, 16, 5).cast(), None, Some(&mut trace))
        .unwrap();
    let sites = net.sites();
    assert_eq!(trace.site_inputs.len(), sites.len());
    assert_eq!(sites.len(), 4);
    for (site, (fl, fs)) in sites.iter().zip(&trace.site_inputs) {
        let da = site.da.as_ref().unwrap();
        let mut g = Graph::new();
        let p = net.params().bind(&mut g, |_| false);
        let (vl, vs) = (g.constant(fl.clone()), g.constant(fs.clone()));
        let aligned = da.forward(&mut g, &p, vl, vs);
        let plain = g.conv2d(vl, p.var(da.w), Some(p.var(da.b)), 1, 1);
        let diff = g.value(aligned).max_abs_diff(g.value(plain));
        assert!(diff < 1e-5, "diff {diff}");
    }
}

#[test]
fn integer_offsets_shift_the_features() {
    let c = 3;
    let x = rand_tensor([1, c, 8, 8], 3, -1.0, 1.0);
    let w = Tensor::from_fn(
        [c, c, 3, 3],
        |o, i, ky, kx| if o == i && ky == 1 && kx == 1 { 1.0 } else { 0.0 },
    );
    for (dy, dx) in [(1.0, 0.0), (0.0, 1.0), (-1.0, 1.0)] {
        let off = Tensor::from_fn([1, 18, 8, 8], |_, ch, _, _| if ch % 2 == 0 { dy } else { dx });
        let mut g = Graph::new();
        let (vx, vo, vw) = (g.constant(x.clone()), g.constant(off), g.constant(w.clone()));
        let y = g.deform_conv(vx, vo, vw, None, 1);
        let y = g.value(y);
        for ch in 0..c {
            for yy in 1..7 {
                for xx in 1..7 {
                    let (sy, sx) = ((yy as f64 + dy) as usize, (xx as f64 + dx) as usize);
                    assert_eq!(y.at(0, ch, yy, xx), x.at(0, ch, sy, sx));
                }
            }
        }
    }
}

#[test]
fn attention_rows_are_distributions() {
    let mut net = EdeiNet::<f64>::new(&small(), 2).unwrap();
    net.params_mut().randomize(5, 0.5);
    let mut trace = Trace::default();
    net.predict_traced(&input(2, 16, 8), None, Some(&mut trace)).unwrap();
    assert_eq!(trace.attention.len(), 4);
    for a in &trace.attention {
        let d = a.w();
        for row in a.data().chunks(d) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            assert!(row.iter().all(|&v| v >= 0.0));
        }
    }
}

/// Single-head channel attention evaluated directly from its definition.
fn direct_attention(q: &Tensor<f64>, k: &Tensor<f64>, v: &Tensor<f64>, tau: f64) -> Tensor<f64> {
    let [_, c, h, w] = q.shape();
    let p = h * w;
    let unit = |t: &Tensor<f64>, i: usize| {
        let row = &t.data()[i * p..(i + 1) * p];
        let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        row.iter().map(|x| x / n).collect::<Vec<_>>()
    };
    let mut out = vec![0.0; c * p];
    for i in 0..c {
        let qi = unit(q, i);
        let logits: Vec<f64> = (0..c)
            .map(|j| tau * qi.iter().zip(unit(k, j)).map(|(a, b)| a * b).sum::<f64>() / (c as f64).sqrt())
            .collect();
        let z: f64 = logits.iter().map(|l| l.exp()).sum();
        for j in 0..c {
            let a = logits[j].exp() / z;
            for px in 0..p {
                out[i * p + px] += a * v.data()[j * p + px];
            }
        }
    }
    Tensor::from_vec([1, c, h, w], out)
}

#[test]
fn head_split_matches_direct_evaluation() {
    let (q, k, v) = (
        rand_tensor([1, 4, 5, 6], 1, -1.0, 1.0),
        rand_tensor([1, 4, 5, 6], 2, -1.0, 1.0),
        rand_tensor([1, 4, 5, 6], 3, -1.0, 1.0),
    );
    let mut g = Graph::new();
    let (vq, vk, vv) = (g.constant(q.clone()), g.constant(k.clone()), g.constant(v.clone()));
    let t1 = g.constant(Tensor::full([1, 1, 1, 1], 1.7));
    let one = g.channel_attention(vq, vk, vv, t1, 1);
    assert!(g.value(one).max_abs_diff(&direct_attention(&q, &k, &v, 1.7)) < 1e-12);

    let t2 = g.constant(Tensor::from_vec([1, 2, 1, 1], vec![0.5, 2.0]));
    let two = g.channel_attention(vq, vk, vv, t2, 2);
    let half = |t: &Tensor<f64>, i: usize| Tensor::from_vec([1, 2, 5, 6], t.data()[i * 60..(i + 1) * 60].to_vec());
    let expect: Vec<f64> = (0..2)
        .flat_map(|i| direct_attention(&half(&q, i), &half(&k, i), &half(&v, i), [0.5, 2.0][i]).into_data())
        .collect();
    assert!(g.value(two).max_abs_diff(&Tensor::from_vec([1, 4, 5, 6], expect)) < 1e-12);
}

#[test]
fn zero_values_leave_only_the_feed_forward_residual() {
    let mut store = ParamStore::<f64>::default();
    let caf = CrossAttention::new(&mut Builder::new(&mut store, 1), "caf", 4, 2);
    store.randomize(4, 0.4);
    for id in [caf.ln_kv.beta, caf.kv_pw.b, caf.kv_dw.b] {
        store.get_mut(id).data_mut().fill(0.0);
    }
    let fs = rand_tensor([1, 4, 6, 6], 5, -1.0, 1.0);
    let mut g = Graph::new();
    let p = store.bind(&mut g, |_| false);
    let (vs, vl) = (g.constant(fs), g.constant(Tensor::zeros([1, 4, 6, 6])));
    let out = caf.forward(&mut g, &p, vs, vl, None);
    let ffn = caf.ffn(&mut g, &p, vs);
    assert!(g.value(out).max_abs_diff(g.value(ffn)) < 1e-12);
}

#[test]
fn deformable_align_ignores_fs_values_when_offsets_are_zero() {
    let mut store = ParamStore::<f64>::default();
    let da = DeformAlign::new(&mut Builder::new(&mut store, 1), "da", 4, 1);
    let fl = rand_tensor([1, 4, 6, 6], 5, -1.0, 1.0);
    let outs: Vec<_> = [6, 7]
        .iter()
        .map(|&s| {
            let mut g = Graph::new();
            let p = store.bind(&mut g, |_| false);
            let (a, b) = (
                g.constant(fl.clone()),
                g.constant(rand_tensor([1, 4, 6, 6], s, -1.0, 1.0)),
            );
            let y = da.forward(&mut g, &p, a, b);
            g.value(y).clone()
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn gated_fusion_mask_and_overrides() {
    let mut net = EdeiNet::<f64>::new(&small(), 3).unwrap();
    let x = input(1, 16, 4);
    let mut trace = Trace::default();
    net.predict_traced(&x, None, Some(&mut trace)).unwrap();
    let m = trace.mask.unwrap();
    assert_eq!(m.shape(), [1, 1, 16, 16]);
    let (lo, hi) = m
        .data()
        .iter()
        .fold((1.0f64, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    assert!(lo > 0.0 && hi < 1.0, "mask range {lo}..{hi}");

    // all-ones mask: the fused output only sees the enhancement features
    net.params_mut().randomize(8, 0.3);
    let mut g = Graph::new();
    let p = net.params().bind(&mut g, |_| false);
    let iv = InputVars::constants(&mut g, &x);
    let o = net.forward_paths(&mut g, &p, iv, None);
    let fused = net.cgf_fuse(&mut g, &p, &o, Some(1.0), None);
    let f = &net.fusion;
    let fs = f.sam_s.forward(&mut g, &p, o.enhanced, o.feat_s);
    let r = f.out.forward(&mut g, &p, fs);
    let manual = g.add(r, o.enhanced);
    assert!(g.value(fused).max_abs_diff(g.value(manual)) < 1e-12);

    // zeroed output conv: the fused image is the enhanced one
    for id in [f.out.w, f.out.b] {
        net.params_mut().get_mut(id).data_mut().fill(0.0);
    }
    let pr = net.predict(&x).unwrap();
    assert_eq!(pr.fused, pr.enhanced);
}

#[test]
fn features_of_zero_inputs_vanish_with_zero_biases() {
    let mut net = EdeiNet::<f64>::new(&small(), 3).unwrap();
    let fe = net.deblur.feat.clone();
    for id in [fe.conv.b, fe.res.c1.b, fe.res.c2.b] {
        net.params_mut().get_mut(id).data_mut().fill(0.0);
    }
    let mut g = Graph::new();
    let p = net.params().bind(&mut g, |_| false);
    let (im, ev) = (
        g.constant(Tensor::zeros([1, 3, 16, 16])),
        g.constant(Tensor::zeros([1, 6, 16, 16])),
    );
    let y = fe.forward(&mut g, &p, im, ev);
    assert_eq!(g.value(y).shape(), [1, 8, 16, 16]);
    assert!(g.value(y).data().iter().all(|&v| v == 0.0));
}

/// Parameter count of a one-scale network, layer by layer.
fn hand_count(c: usize, img: usize, bins: usize, heads: usize, groups: usize, blocks: usize) -> (usize, usize) {
    let conv = |cin: usize, cout: usize, k: usize| cout * cin * k * k + cout;
    let dw = |ch: usize| ch * 9 + ch;
    let ln = |ch: usize| 2 * ch;
    let res = 2 * conv(c, c, 3);
    let path = conv(img + bins, c, 3) + res + 2 * blocks * res + conv(c, img, 3);
    let da = conv(2 * c, 18 * groups, 3) + conv(c, c, 3);
    let caf = ln(c)
        + conv(c, c, 1)
        + dw(c)
        + ln(c)
        + conv(c, 2 * c, 1)
        + dw(2 * c)
        + heads
        + ln(c)
        + conv(c, 2 * c, 1)
        + dw(2 * c)
        + conv(2 * c, c, 1);
    let paths = 2 * path + 2 * (da + caf);
    let sam = conv(c, c, 3) + conv(c, img, 3) + conv(img, c, 3);
    let cgf = 2 * sam + conv(2 * c, c, 3) + conv(c, 1, 3) + conv(c, img, 3);
    (paths + cgf, paths)
}

#[test]
fn parameter_count_matches_the_layer_sum() {
    let cfg = ModelConfig {
        base_channels: 1,
        num_scales: 1,
        attn_heads: 1,
        dcn_groups: 1,
        blocks_per_scale: 1,
        ..ModelConfig::default()
    };
    let n = count_parameters(&cfg).unwrap();
    assert_eq!((n.total, n.paths), hand_count(1, 3, 6, 1, 1, 1));
    assert_eq!(n.total, 1383);
    let cfg4 = ModelConfig {
        base_channels: 4,
        attn_heads: 2,
        dcn_groups: 2,
        blocks_per_scale: 2,
        ..cfg
    };
    let n = count_parameters(&cfg4).unwrap();
    assert_eq!((n.total, n.paths), hand_count(4, 3, 6, 2, 2, 2));
}

#[test]
fn conv_weights_scale_quadratically_with_width() {
    let weights = |c: usize| {
        let cfg = ModelConfig {
            base_channels: c,
            ..ModelConfig::default()
        };
        let net = EdeiNet::<f32>::new(&cfg, 0).unwrap();
        let p = net.params();
        p.ids()
            .filter(|&id| {
                let n = p.name(id);
                let s = p.get(id).shape();
                // feature-to-feature convolutions only
                n.ends_with(".w")
                    && !n.contains("offset")
                    && s[0].is_multiple_of(c)
                    && s[1].is_multiple_of(c)
                    && s[1] > 1
            })
            .map(|id| p.get(id).len())
            .sum::<usize>()
    };
    let ratio = weights(32) as f64 / weights(16) as f64;
    assert!((ratio - 4.0).abs() < 1e-9, "ratio {ratio}");
}

#[test]
fn default_size_is_reported() {
    let n = count_parameters(&ModelConfig::default()).unwrap();
    let rel = n.total as f64 / 9.46e6;
    println!(
        "default parameters: {} total, {} without gated fusion",
        n.total, n.paths
    );
    assert!((0.6..=1.4).contains(&rel));
}

#[test]
fn ablation_flags_shape_the_parameter_set() {
    let full = EdeiNet::<f32>::new(&small(), 0).unwrap();
    let same = EdeiNet::<f32>::new(
        &ModelConfig {
            ablation: Ablation::default(),
            ..small()
        },
        0,
    )
    .unwrap();
    assert_eq!(full.params(), same.params());
    let bare = EdeiNet::<f32>::new(
        &ModelConfig {
            ablation: Ablation {
                enable_da: false,
                enable_caf: false,
                ..Ablation::default()
            },
            ..small()
        },
        0,
    )
    .unwrap();
    let p = bare.params();
    assert!(p.ids().all(|id| !p.name(id).starts_with("dfaf.")));
    let serial_bad = Ablation {
        serial_pipeline: true,
        ..Ablation::default()
    };
    assert!(edei_net::apply_ablation(&small(), serial_bad).is_err());
    let serial = Ablation {
        serial_pipeline: true,
        enable_da: false,
        enable_caf: false,
        ..Ablation::default()
    };
    let cfg = edei_net::apply_ablation(&small(), serial).unwrap();
    let net = EdeiNet::<f64>::new(&cfg, 0).unwrap();
    let x = input(1, 16, 3);
    let pr = net.predict(&x).unwrap();
    assert_eq!(pr.enhanced, x.short);
    assert!(net.params().ids().any(|id| is_fusion_param(net.params().name(id))));
}
