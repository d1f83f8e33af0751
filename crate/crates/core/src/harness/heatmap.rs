//! Confusion-matrix renders: SVG with embedded values, or plain PGM.

use std::fmt::Write as _;
use std::path::Path;

use crate::confusion::{ConfusionMatrix, Square};
use crate::dataset::NUM_LABELS;
use crate::error::{Error, Result};

const CELL: usize = 48;
const MARGIN: usize = 40;
const PGM_CELL: usize = 16;

/// Gray level in `[0, 1]`, 1 for the largest cell.
fn shade(value: f64, max: f64) -> f64 {
    if max > 0.0 {
        (value / max).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

fn max_cell(rows: &Square) -> f64 {
    rows.iter().flatten().copied().fold(0.0, f64::max)
}

pub fn render_svg(m: &ConfusionMatrix, title: &str) -> String {
    let max = max_cell(&m.rows);
    let side = MARGIN + NUM_LABELS * CELL;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif">"#,
        w = side + 10,
        h = side + 30
    );
    let _ = writeln!(s, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(
        s,
        r#"<text x="{}" y="16" font-size="13" text-anchor="middle">{} (fidelity {:.2}%)</text>"#,
        side / 2,
        escape(title),
        100.0 * m.fidelity()
    );
    let top = MARGIN;
    for k in 0..NUM_LABELS {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{k}</text>"#,
            MARGIN + k * CELL + CELL / 2,
            top - 6
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="end">{k}</text>"#,
            MARGIN - 6,
            top + k * CELL + CELL / 2 + 4
        );
    }
    for (j, row) in m.rows.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            let t = shade(v, max);
            let level = (255.0 * (1.0 - t)).round() as u8;
            let (x, y) = (MARGIN + k * CELL, top + j * CELL);
            let _ = writeln!(
                s,
                r##"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="#{level:02x}{level:02x}{level:02x}" stroke="#999" data-row="{j}" data-col="{k}" data-value="{v:?}"/>"##
            );
            let ink = if t > 0.5 { "#fff" } else { "#000" };
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" font-size="11" text-anchor="middle" fill="{ink}">{v:.2}</text>"#,
                x + CELL / 2,
                y + CELL / 2 + 4
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">inferred label</text>"#,
        MARGIN + NUM_LABELS * CELL / 2,
        side + 20
    );
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Recovers the cell values embedded in an SVG render.
pub fn parse_svg(text: &str) -> Result<Square> {
    let bad = |detail: String| Error::Parse {
        what: "heatmap SVG",
        detail,
    };
    let attr = |tag: &str, name: &str| -> Option<String> {
        let key = format!(" {name}=\"");
        let start = tag.find(&key)? + key.len();
        let end = tag[start..].find('"')? + start;
        Some(tag[start..end].to_string())
    };
    let mut out = [[f64::NAN; NUM_LABELS]; NUM_LABELS];
    for tag in text.split('<').filter(|t| t.starts_with("rect ")) {
        let (Some(r), Some(c), Some(v)) = (attr(tag, "data-row"), attr(tag, "data-col"), attr(tag, "data-value")) else {
            continue;
        };
        let (r, c): (usize, usize) = (
            r.parse().map_err(|_| bad(format!("row {r:?}")))?,
            c.parse().map_err(|_| bad(format!("col {c:?}")))?,
        );
        if r >= NUM_LABELS || c >= NUM_LABELS {
            return Err(bad(format!("cell ({r},{c}) out of range")));
        }
        out[r][c] = v.parse().map_err(|_| bad(format!("value {v:?}")))?;
    }
    if out.iter().flatten().any(|v| v.is_nan()) {
        return Err(bad("missing cells".into()));
    }
    Ok(out)
}

/// Binary PGM, one `16×16` block per cell, darker for larger values.
pub fn render_pgm(m: &ConfusionMatrix) -> Vec<u8> {
    let max = max_cell(&m.rows);
    let side = NUM_LABELS * PGM_CELL;
    let mut out = format!("P5\n{side} {side}\n255\n").into_bytes();
    for y in 0..side {
        for x in 0..side {
            let t = shade(m.rows[y / PGM_CELL][x / PGM_CELL], max);
            out.push((255.0 * (1.0 - t)).round() as u8);
        }
    }
    out
}

/// Cell shades (`0` white, `1` darkest) read back from a PGM render.
pub fn parse_pgm(bytes: &[u8]) -> Result<Square> {
    let bad = |detail: &str| Error::Parse {
        what: "heatmap PGM",
        detail: detail.to_string(),
    };
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    let side = NUM_LABELS * PGM_CELL;
    if fields[0] != "P5" || fields[1] != side.to_string() || fields[2] != side.to_string() || fields[3] != "255" {
        return Err(bad("unexpected header"));
    }
    let data = bytes.get(pos..pos + side * side).ok_or_else(|| bad("truncated raster"))?;
    let mut out = [[0.0; NUM_LABELS]; NUM_LABELS];
    for (j, row) in out.iter_mut().enumerate() {
        for (k, cell) in row.iter_mut().enumerate() {
            let px = data[(j * PGM_CELL + PGM_CELL / 2) * side + k * PGM_CELL + PGM_CELL / 2];
            *cell = 1.0 - px as f64 / 255.0;
        }
    }
    Ok(out)
}

/// Writes an SVG, or a PGM when the path ends in `.pgm`.
pub fn emit_heatmap(m: &ConfusionMatrix, path: &Path, title: &str) -> Result<()> {
    let bytes = match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => render_pgm(m),
        _ => render_svg(m, title).into_bytes(),
    };
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
