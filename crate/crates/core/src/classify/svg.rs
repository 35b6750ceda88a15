use std::fmt::Write as _;

/// A colored point cloud layer.
pub struct Layer<'a> {
    pub points: &'a [(f64, f64)],
    pub color: &'a str,
    pub radius: f64,
}

/// Plot window in data coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Viewport {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub width: u32,
    pub height: u32,
}

/// Renders layers as an SVG scatter plot; points outside the viewport are dropped.
pub fn scatter_svg(layers: &[Layer], view: Viewport) -> String {
    let (w, h) = (view.width as f64, view.height as f64);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        view.width, view.height, view.width, view.height
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for layer in layers {
        let _ = writeln!(out, r#"<g fill="{}">"#, layer.color);
        for &(px, py) in layer.points {
            let u = (px - view.x.0) / (view.x.1 - view.x.0);
            let v = (py - view.y.0) / (view.y.1 - view.y.0);
            if (0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v) {
                let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="{}"/>"#, u * w, (1.0 - v) * h, layer.radius);
            }
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}
