use edei_core::rng::{keyed, Stream};
use edei_net::gradcheck::check_params;
use edei_net::loss::loss_on_graph;
use edei_net::model::InputVars;
use edei_net::{EdeiNet, Lambdas, ModelConfig, ModelInput, Tensor};
use rand::Rng;

fn rand_tensor(shape: [usize; 4], seed: u64, lo: f64, hi: f64) -> Tensor<f64> {
    let mut r = keyed(seed, Stream::Test, 11, 0);
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| r.random_range(lo..hi)).collect())
}

#[test]
fn whole_network_gradients_match_finite_differences() {
    let cfg = ModelConfig {
        base_channels: 4,
        num_scales: 1,
        attn_heads: 2,
        dcn_groups: 1,
        blocks_per_scale: 1,
        ..ModelConfig::default()
    };
    let size = 8;
    let mut net = EdeiNet::<f64>::new(&cfg, 3).unwrap();
    net.params_mut().randomize(4, 0.3);
    let x = ModelInput {
        short: rand_tensor([1, 3, size, size], 1, 0.0, 0.4),
        long: rand_tensor([1, 3, size, size], 2, 0.2, 1.0),
        vox_deblur: rand_tensor([1, 6, size, size], 3, -1.0, 1.0),
        vox_enhance: rand_tensor([1, 6, size, size], 4, -1.0, 1.0),
    };
    let gt = rand_tensor([1, 3, size, size], 5, 0.0, 1.0);
    let report = check_params(
        &mut net,
        &|net, g, p| {
            let iv = InputVars::constants(g, &x);
            let o = net.forward_paths(g, p, iv, None);
            let f = net.cgf_fuse(g, p, &o, None, None);
            loss_on_graph(g, Some(f), o.enhanced, o.deblurred, &gt, Lambdas::new(1.0, 1.0, 0.5)).unwrap()
        },
        1e-6,
    );
    let rate = report.pass_rate(1e-3);
    assert!(rate >= 0.99, "pass rate {rate}, worst {:?}", report.worst());
}
