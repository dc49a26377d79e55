//! Side-by-side figure panels with zoomed insets and per-crop captions.

use edei_core::frame::MIN_SIDE;
use edei_core::metrics::{psnr, ssim};
use edei_core::Frame;

use crate::font;

/// An inset rectangle in panel coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Inset {
    pub y: usize,
    pub x: usize,
    pub h: usize,
    pub w: usize,
}

impl std::str::FromStr for Inset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let v: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse().map_err(|_| format!("inset `{s}` must be y,x,h,w")))
            .collect::<Result<_, _>>()?;
        match v[..] {
            [y, x, h, w] if h > 0 && w > 0 => Ok(Inset { y, x, h, w }),
            _ => Err(format!("inset `{s}` must be y,x,h,w with positive size")),
        }
    }
}

impl Inset {
    /// Clips to an `h x w` image; `None` when less than a minimal frame remains.
    pub fn clip(&self, h: usize, w: usize) -> Option<Inset> {
        if self.y >= h || self.x >= w {
            return None;
        }
        let r = Inset {
            y: self.y,
            x: self.x,
            h: self.h.min(h - self.y),
            w: self.w.min(w - self.x),
        };
        (r.h >= MIN_SIDE && r.w >= MIN_SIDE).then_some(r)
    }
}

pub struct Panel {
    pub title: String,
    pub image: Frame,
    /// Scored against the reference when one is given.
    pub scored: bool,
}

/// Scales `short` so its mean matches `target_mean`, for display only.
pub fn rescale_brightness(short: &Frame, target_mean: f64) -> Frame {
    let m = short.mean();
    let k = if m > 1e-6 { target_mean / m } else { 1.0 };
    short.map(|v| (v * k).clamp(0.0, 1.0))
}

const GAP: usize = 4;
const SCALE: usize = 2;
const LINE: usize = (font::GLYPH_H + 2) * SCALE;
const INSET_COLORS: [[f64; 3]; 4] = [[1.0, 0.2, 0.2], [0.2, 1.0, 0.2], [0.3, 0.5, 1.0], [1.0, 1.0, 0.2]];

struct Canvas {
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl Canvas {
    fn put(&mut self, y: usize, x: usize, rgb: [f64; 3]) {
        if y < self.h && x < self.w {
            for (c, v) in rgb.iter().enumerate() {
                self.data[(c * self.h + y) * self.w + x] = *v;
            }
        }
    }

    fn blit(&mut self, f: &Frame, y0: usize, x0: usize) {
        for y in 0..f.height() {
            for x in 0..f.width() {
                let px = |c: usize| f.at(if f.channels() == 1 { 0 } else { c }, y, x).clamp(0.0, 1.0);
                self.put(y0 + y, x0 + x, [px(0), px(1), px(2)]);
            }
        }
    }

    fn outline(&mut self, r: &Inset, y0: usize, x0: usize, rgb: [f64; 3]) {
        for x in r.x..r.x + r.w {
            self.put(y0 + r.y, x0 + x, rgb);
            self.put(y0 + r.y + r.h - 1, x0 + x, rgb);
        }
        for y in r.y..r.y + r.h {
            self.put(y0 + y, x0 + r.x, rgb);
            self.put(y0 + y, x0 + r.x + r.w - 1, rgb);
        }
    }

    /// Draws `s` at the largest scale up to [`SCALE`] that fits `max_w`,
    /// one word per line when even the smallest scale is too wide.
    fn text(&mut self, s: &str, y0: usize, x0: usize, max_w: usize) {
        let fits = |t: &str| (1..=SCALE).rev().find(|&k| font::text_width(t, k) <= max_w);
        let lines: Vec<&str> = if fits(s).is_some() {
            vec![s]
        } else {
            s.split(' ').collect()
        };
        let mut pts = Vec::new();
        for (i, l) in lines.iter().enumerate() {
            let scale = if lines.len() > 1 { 1 } else { fits(l).unwrap_or(1) };
            font::render(l, y0 + i * LINE / 2, x0, scale, |y, x| pts.push((y, x)));
        }
        for (y, x) in pts {
            self.put(y, x, [1.0, 1.0, 1.0]);
        }
    }
}

/// Nearest-neighbour zoom of `crop` to width `w`.
fn zoom(crop: &Frame, w: usize) -> Frame {
    let f = (w as f64 / crop.width() as f64).max(1.0);
    let (zh, zw) = (((crop.height() as f64) * f).round() as usize, w.max(crop.width()));
    Frame::from_fn(crop.channels(), zh.max(8), zw.max(8), |c, y, x| {
        let sy = ((y as f64 / f) as usize).min(crop.height() - 1);
        let sx = ((x as f64 / f) as usize).min(crop.width() - 1);
        crop.at(c, sy, sx)
    })
    .expect("zoomed crop is valid")
}

/// Caption of one inset: PSNR and, when the crop fits the window, SSIM.
pub fn crop_caption(pred: &Frame, gt: &Frame) -> String {
    let p = psnr(&pred.clamped(), &gt.clamped()).unwrap_or(f64::NAN);
    match ssim(&pred.clamped(), &gt.clamped()) {
        Ok(s) => format!("{p:.2}DB {s:.3}"),
        Err(_) => format!("{p:.2}DB"),
    }
}

/// The composite plus warnings about clipped or dropped insets.
pub struct Composite {
    pub image: Frame,
    pub warnings: Vec<String>,
    pub captions: Vec<Vec<String>>,
}

/// One column per panel: title, image with inset outlines, then each zoomed
/// inset with its caption. All panels must share a size.
pub fn compose(panels: &[Panel], insets: &[Inset], reference: Option<&Frame>) -> Result<Composite, String> {
    let first = panels.first().ok_or("no panels")?;
    let (ph, pw) = (first.image.height(), first.image.width());
    if panels.iter().any(|p| !p.image.same_size(&first.image)) {
        return Err("panels differ in size".into());
    }
    if reference.is_some_and(|r| !r.same_size(&first.image)) {
        return Err("reference differs in size from the panels".into());
    }
    let mut warnings = Vec::new();
    let mut kept = Vec::new();
    for r in insets {
        match r.clip(ph, pw) {
            Some(c) if c == *r => kept.push(c),
            Some(c) => {
                warnings.push(format!("inset {r:?} clipped to {c:?}"));
                kept.push(c);
            }
            None => warnings.push(format!(
                "inset {r:?} leaves less than {MIN_SIDE}x{MIN_SIDE} pixels inside the {ph}x{pw} image and was dropped"
            )),
        }
    }
    let zooms: Vec<Vec<Frame>> = panels
        .iter()
        .map(|p| {
            kept.iter()
                .map(|r| zoom(&p.image.crop(r.y, r.x, r.h, r.w).expect("clipped inset"), pw))
                .collect()
        })
        .collect();
    let zoom_h: usize = zooms
        .first()
        .map_or(0, |z| z.iter().map(|f| f.height() + GAP + LINE).sum());
    let h = LINE + ph + GAP + zoom_h;
    let w = panels.len() * pw + (panels.len() + 1) * GAP;
    let mut cv = Canvas {
        h,
        w,
        data: vec![0.0; 3 * h * w],
    };
    let mut captions = Vec::new();
    for (i, p) in panels.iter().enumerate() {
        let x0 = GAP + i * (pw + GAP);
        cv.text(&p.title, 2, x0, pw);
        cv.blit(&p.image, LINE, x0);
        for (k, r) in kept.iter().enumerate() {
            cv.outline(r, LINE, x0, INSET_COLORS[k % INSET_COLORS.len()]);
        }
        let mut y = LINE + ph + GAP;
        let mut col = Vec::new();
        for (k, z) in zooms[i].iter().enumerate() {
            cv.blit(z, y, x0);
            y += z.height() + 1;
            let cap = match reference {
                Some(gt) if p.scored => {
                    let r = kept[k];
                    crop_caption(
                        &p.image.crop(r.y, r.x, r.h, r.w).expect("clipped inset"),
                        &gt.crop(r.y, r.x, r.h, r.w).expect("clipped inset"),
                    )
                }
                _ => String::new(),
            };
            cv.text(&cap, y, x0, pw);
            col.push(cap);
            y += LINE + GAP - 1;
        }
        captions.push(col);
    }
    let image = Frame::new(3, h, w, cv.data).map_err(|e| e.to_string())?;
    Ok(Composite {
        image,
        warnings,
        captions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(v: f64) -> Panel {
        Panel {
            title: "X".into(),
            image: Frame::from_fn(3, 32, 40, |c, y, x| (v + 0.01 * (c + y + x) as f64) % 1.0).unwrap(),
            scored: true,
        }
    }

    #[test]
    fn four_panels_make_four_columns() {
        let ps: Vec<Panel> = (0..4).map(|i| panel(i as f64 * 0.2)).collect();
        let c = compose(
            &ps,
            &[Inset {
                y: 4,
                x: 4,
                h: 12,
                w: 12,
            }],
            Some(&ps[3].image),
        )
        .unwrap();
        assert_eq!(c.image.width(), 4 * 40 + 5 * GAP);
        assert_eq!(c.captions.len(), 4);
        assert!(c.warnings.is_empty());
        assert!(c.captions[3][0].starts_with("100.00DB 1.000"));
    }

    #[test]
    fn outside_insets_are_clipped_or_dropped() {
        let ps = vec![panel(0.1)];
        let c = compose(
            &ps,
            &[
                Inset {
                    y: 20,
                    x: 30,
                    h: 20,
                    w: 20,
                },
                Inset {
                    y: 50,
                    x: 0,
                    h: 4,
                    w: 4,
                },
            ],
            None,
        )
        .unwrap();
        assert_eq!(c.warnings.len(), 2);
        assert!(c.warnings[0].contains("clipped"));
        assert!(c.warnings[1].contains("dropped"));
    }

    #[test]
    fn composite_is_deterministic() {
        let ps: Vec<Panel> = (0..2).map(|i| panel(i as f64 * 0.3)).collect();
        let r = [Inset {
            y: 0,
            x: 0,
            h: 16,
            w: 16,
        }];
        assert_eq!(
            compose(&ps, &r, Some(&ps[0].image)).unwrap().image,
            compose(&ps, &r, Some(&ps[0].image)).unwrap().image
        );
    }

    #[test]
    fn parses_insets() {
        assert_eq!("1,2,3,4".parse::<Inset>().unwrap(), Inset { y: 1, x: 2, h: 3, w: 4 });
        assert!("1,2,0,4".parse::<Inset>().is_err());
        assert!("1,2".parse::<Inset>().is_err());
    }
}
