//! Heatmap rendering as standalone SVG.

use std::fmt::Write;

use cwsim::SimilarityHeatmap;

/// Stops of a perceptually ordered dark-blue to yellow ramp.
const PALETTE: [(u8, u8, u8); 5] = [
    (0x44, 0x01, 0x54),
    (0x3b, 0x52, 0x8b),
    (0x21, 0x91, 0x8c),
    (0x5e, 0xc9, 0x62),
    (0xfd, 0xe7, 0x25),
];

const CHAR_WIDTH: f64 = 7.0;
const FONT_SIZE: usize = 12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Palette {
    #[default]
    Sequential,
}

/// Hex color for `t` in `[0, 1]`.
pub fn palette_color(_palette: Palette, t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * (PALETTE.len() - 1) as f64;
    let i = (t.floor() as usize).min(PALETTE.len() - 2);
    let f = t - i as f64;
    let (a, b) = (PALETTE[i], PALETTE[i + 1]);
    let mix = |x: u8, y: u8| (x as f64 + (y as f64 - x as f64) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

#[derive(Debug, PartialEq, Eq)]
pub struct EmptyHeatmap;

impl std::fmt::Display for EmptyHeatmap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("heatmap has no present cells to render")
    }
}

impl std::error::Error for EmptyHeatmap {}

pub fn render_heatmap_svg(
    h: &SimilarityHeatmap,
    palette: Palette,
    cell_size: u32,
) -> Result<String, EmptyHeatmap> {
    let (min, max) = h
        .present_values()
        .fold(None, |acc: Option<(f64, f64)>, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
        .ok_or(EmptyHeatmap)?;
    let cell = cell_size.max(1) as f64;
    let rows: Vec<String> = h.row_labels.iter().map(ToString::to_string).collect();
    let cols: Vec<String> = h.col_labels.iter().map(ToString::to_string).collect();
    let longest = |v: &[String]| v.iter().map(|s| s.chars().count()).max().unwrap_or(0) as f64;
    let left = 10.0 + longest(&rows) * CHAR_WIDTH;
    let subtitle = (!h.symmetric).then_some(h.orientation.as_str());
    let top = if subtitle.is_some() { 52.0 } else { 34.0 };
    let grid_w = cell * cols.len() as f64;
    let grid_h = cell * rows.len() as f64;
    let bottom = 10.0 + longest(&cols) * CHAR_WIDTH;
    let legend = 24.0;
    let text_w = h.measure.len().max(subtitle.map_or(0, str::len)) as f64 * CHAR_WIDTH;
    let width = (left + grid_w + 10.0).max(text_w + 20.0);
    let height = top + grid_h + bottom + legend;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="{FONT_SIZE}">"#
    );
    s.push_str(concat!(
        r##"<defs><pattern id="absent" patternUnits="userSpaceOnUse" width="6" height="6">"##,
        r##"<rect width="6" height="6" fill="#ffffff"/><path d="M0,6 L6,0" stroke="#999999" stroke-width="1"/>"##,
        "</pattern></defs>\n"
    ));
    let _ = writeln!(
        s,
        r#"<text class="title" x="10" y="20" font-size="16">{}</text>"#,
        escape(&h.measure)
    );
    if let Some(note) = subtitle {
        let _ = writeln!(s, r#"<text class="subtitle" x="10" y="40">{}</text>"#, escape(note));
    }
    for (r, label) in rows.iter().enumerate() {
        let y = top + cell * (r as f64 + 0.5);
        let _ = writeln!(
            s,
            r#"<text class="row-label" x="{}" y="{y}" text-anchor="end" dominant-baseline="middle">{}</text>"#,
            left - 5.0,
            escape(label)
        );
    }
    for (c, label) in cols.iter().enumerate() {
        let x = left + cell * (c as f64 + 0.5);
        let y = top + grid_h + 5.0;
        let _ = writeln!(
            s,
            r#"<text class="col-label" x="{x}" y="{y}" transform="rotate(90 {x} {y})" dominant-baseline="middle">{}</text>"#,
            escape(label)
        );
    }
    let span = max - min;
    for (r, row) in h.values.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            let x = left + cell * c as f64;
            let y = top + cell * r as f64;
            match v {
                Some(v) => {
                    let t = if span > 0.0 { (v - min) / span } else { 0.5 };
                    let _ = writeln!(
                        s,
                        r#"<rect class="cell" x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{}"><title>{} / {}: {v}</title></rect>"#,
                        palette_color(palette, t),
                        escape(&rows[r]),
                        escape(&cols[c])
                    );
                }
                None => {
                    let _ = writeln!(
                        s,
                        r#"<rect class="cell absent" x="{x}" y="{y}" width="{cell}" height="{cell}" fill="url(#absent)"><title>{} / {}: absent</title></rect>"#,
                        escape(&rows[r]),
                        escape(&cols[c])
                    );
                }
            }
        }
    }
    let ly = height - legend + 14.0;
    let _ = writeln!(
        s,
        r#"<text class="legend" x="10" y="{ly}">min {min} ({}) max {max} ({})</text>"#,
        palette_color(palette, if span > 0.0 { 0.0 } else { 0.5 }),
        palette_color(palette, if span > 0.0 { 1.0 } else { 0.5 })
    );
    s.push_str("</svg>\n");
    Ok(s)
}
