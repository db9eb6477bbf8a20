//! Deterministic SVG plots: fixed canvas, glyphs rendered as stroked paths
//! from a built-in segment font (no font references), byte-identical output
//! for identical input.

use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    #[default]
    Scatter,
    Line,
}

/// Optional y = scale * ln(x)^kappa reference overlay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ReferenceCurve {
    pub kappa: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct PlotSpec {
    pub title: String,
    pub x_col: String,
    pub y_col: String,
    #[serde(default)]
    pub log_x: bool,
    #[serde(default)]
    pub kind: PlotKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceCurve>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 64.0;

/// Segment font: unit box, y up; segments as (x1, y1, x2, y2).
fn glyph_segments(c: char) -> Vec<(f64, f64, f64, f64)> {
    let a = (0.0, 1.0, 1.0, 1.0); // top
    let b = (1.0, 1.0, 1.0, 0.5); // top right
    let cseg = (1.0, 0.5, 1.0, 0.0); // bottom right
    let d = (0.0, 0.0, 1.0, 0.0); // bottom
    let e = (0.0, 0.5, 0.0, 0.0); // bottom left
    let f = (0.0, 1.0, 0.0, 0.5); // top left
    let g = (0.0, 0.5, 1.0, 0.5); // middle
    match c.to_ascii_uppercase() {
        '0' | 'O' | 'D' => vec![a, b, cseg, d, e, f],
        '1' => vec![b, cseg],
        '2' => vec![a, b, g, e, d],
        '3' => vec![a, b, g, cseg, d],
        '4' => vec![f, g, b, cseg],
        '5' | 'S' => vec![a, f, g, cseg, d],
        '6' => vec![a, f, g, e, cseg, d],
        '7' => vec![a, b, cseg],
        '8' | 'B' => vec![a, b, cseg, d, e, f, g],
        '9' => vec![a, b, cseg, d, f, g],
        '-' => vec![g],
        '.' => vec![(0.4, 0.0, 0.6, 0.0)],
        '+' => vec![g, (0.5, 0.75, 0.5, 0.25)],
        'E' => vec![a, f, g, e, d],
        'A' => vec![a, b, cseg, e, f, g],
        'C' => vec![a, f, e, d],
        'F' => vec![a, f, g, e],
        'G' => vec![a, f, e, d, cseg, (0.5, 0.5, 1.0, 0.5)],
        'H' => vec![f, e, b, cseg, g],
        'I' => vec![(0.5, 1.0, 0.5, 0.0)],
        'L' => vec![f, e, d],
        'N' => vec![(0.0, 0.0, 0.0, 1.0), (0.0, 1.0, 1.0, 0.0), (1.0, 0.0, 1.0, 1.0)],
        'P' => vec![f, e, a, b, g],
        'R' => vec![f, e, a, b, g, (0.4, 0.5, 1.0, 0.0)],
        'T' => vec![a, (0.5, 1.0, 0.5, 0.0)],
        'U' => vec![f, e, d, cseg, b],
        'X' => vec![(0.0, 1.0, 1.0, 0.0), (0.0, 0.0, 1.0, 1.0)],
        _ => Vec::new(),
    }
}

/// Path data drawing `text` with glyph height `size`, baseline at (x, y).
fn text_path(text: &str, x: f64, y: f64, size: f64) -> String {
    let mut d = String::new();
    let advance = size * 0.8;
    for (i, c) in text.chars().enumerate() {
        let ox = x + i as f64 * advance;
        for (x1, y1, x2, y2) in glyph_segments(c) {
            d.push_str(&format!(
                "M{:.2} {:.2}L{:.2} {:.2}",
                ox + x1 * size * 0.6,
                y - y1 * size,
                ox + x2 * size * 0.6,
                y - y2 * size
            ));
        }
    }
    d
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if !(0.01..10000.0).contains(&a) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.').to_string();
        if s.is_empty() { "0".to_string() } else { s }
    }
}

/// Minimal RFC-4180 reader: returns (header, rows).
pub fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut records: Vec<Vec<String>> = Vec::new();
    let mut field = String::new();
    let mut record: Vec<String> = Vec::new();
    let mut in_quotes = false;
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if in_quotes {
            if c == '"' {
                if chars.peek() == Some(&'"') {
                    chars.next();
                    field.push('"');
                } else {
                    in_quotes = false;
                }
            } else {
                field.push(c);
            }
        } else {
            match c {
                '"' => in_quotes = true,
                ',' => {
                    record.push(std::mem::take(&mut field));
                }
                '\r' => {}
                '\n' => {
                    record.push(std::mem::take(&mut field));
                    if !(record.len() == 1 && record[0].is_empty()) {
                        records.push(std::mem::take(&mut record));
                    } else {
                        record.clear();
                    }
                }
                _ => field.push(c),
            }
        }
    }
    if !field.is_empty() || !record.is_empty() {
        record.push(field);
        records.push(record);
    }
    if records.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let header = records.remove(0);
    (header, records)
}

/// Render a table to a deterministic SVG plot.
pub fn emit_plot(csv_text: &str, spec: &PlotSpec) -> Result<String, HarnessError> {
    let (header, rows) = parse_csv(csv_text);
    let col = |name: &str| -> Result<usize, HarnessError> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| HarnessError::validation(name, "column missing from table"))
    };
    let xi = col(&spec.x_col)?;
    let yi = col(&spec.y_col)?;
    let mut points: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| {
            let x: f64 = r.get(xi)?.parse().ok()?;
            let y: f64 = r.get(yi)?.parse().ok()?;
            if x.is_finite() && y.is_finite() && (!spec.log_x || x > 0.0) {
                Some((x, y))
            } else {
                None
            }
        })
        .collect();
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    // axes frame
    svg.push_str(&format!(
        "<path d=\"M{m:.2} {m:.2}L{m:.2} {b:.2}L{r:.2} {b:.2}\" stroke=\"black\" fill=\"none\" stroke-width=\"1\"/>\n",
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    ));
    // title
    svg.push_str(&format!(
        "<path d=\"{}\" stroke=\"black\" fill=\"none\" stroke-width=\"1.2\"/>\n",
        text_path(&spec.title, MARGIN, 32.0, 14.0)
    ));

    if points.is_empty() {
        svg.push_str(&format!(
            "<path d=\"{}\" stroke=\"black\" fill=\"none\" stroke-width=\"2\"/>\n",
            text_path("NO DATA", WIDTH / 2.0 - 70.0, HEIGHT / 2.0, 24.0)
        ));
        svg.push_str("</svg>\n");
        return Ok(svg);
    }

    let tx = |x: f64| if spec.log_x { x.ln() } else { x };
    let xs: Vec<f64> = points.iter().map(|p| tx(p.0)).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let reference_ys: Vec<f64> = spec
        .reference
        .iter()
        .flat_map(|r| {
            points
                .iter()
                .filter(|p| p.0 > 1.0)
                .map(move |p| r.scale * p.0.ln().powf(r.kappa))
        })
        .collect();
    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for &x in &xs {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
    }
    for &y in ys.iter().chain(reference_ys.iter()) {
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    if xmax == xmin {
        xmin -= 1.0;
        xmax += 1.0;
    }
    if ymax == ymin {
        ymin -= 1.0;
        ymax += 1.0;
    }
    let pad_x = (xmax - xmin) * 0.05;
    let pad_y = (ymax - ymin) * 0.05;
    xmin -= pad_x;
    xmax += pad_x;
    ymin -= pad_y;
    ymax += pad_y;
    let px = |x: f64| MARGIN + (tx(x) - xmin) / (xmax - xmin) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - ymin) / (ymax - ymin) * (HEIGHT - 2.0 * MARGIN);

    // ticks (5 per axis) with labels
    for i in 0..5 {
        let fx = xmin + (xmax - xmin) * i as f64 / 4.0;
        let sx = MARGIN + (fx - xmin) / (xmax - xmin) * (WIDTH - 2.0 * MARGIN);
        let label = fmt_tick(if spec.log_x { fx.exp() } else { fx });
        svg.push_str(&format!(
            "<path d=\"M{sx:.2} {b:.2}L{sx:.2} {t:.2}\" stroke=\"black\" stroke-width=\"1\"/>\n",
            b = HEIGHT - MARGIN,
            t = HEIGHT - MARGIN + 6.0
        ));
        svg.push_str(&format!(
            "<path d=\"{}\" stroke=\"black\" fill=\"none\" stroke-width=\"1\"/>\n",
            text_path(&label, sx - label.len() as f64 * 4.0, HEIGHT - MARGIN + 24.0, 10.0)
        ));
        let fy = ymin + (ymax - ymin) * i as f64 / 4.0;
        let sy = py(fy);
        let label = fmt_tick(fy);
        svg.push_str(&format!(
            "<path d=\"M{m:.2} {sy:.2}L{l:.2} {sy:.2}\" stroke=\"black\" stroke-width=\"1\"/>\n",
            m = MARGIN - 6.0,
            l = MARGIN
        ));
        svg.push_str(&format!(
            "<path d=\"{}\" stroke=\"black\" fill=\"none\" stroke-width=\"1\"/>\n",
            text_path(&label, 4.0, sy + 4.0, 10.0)
        ));
    }

    // reference curve first so data overlays it
    if let Some(r) = &spec.reference {
        let lo = points.first().unwrap().0.max(1.0001);
        let hi = points.last().unwrap().0.max(lo * 1.001);
        let mut d = String::new();
        for i in 0..=100 {
            let x = if spec.log_x {
                (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / 100.0).exp()
            } else {
                lo + (hi - lo) * i as f64 / 100.0
            };
            let y = r.scale * x.ln().powf(r.kappa);
            d.push_str(&format!("{}{:.2} {:.2}", if i == 0 { "M" } else { "L" }, px(x), py(y)));
        }
        svg.push_str(&format!(
            "<path d=\"{d}\" stroke=\"gray\" fill=\"none\" stroke-width=\"1\" stroke-dasharray=\"4 3\"/>\n"
        ));
    }

    match spec.kind {
        PlotKind::Line => {
            let mut d = String::new();
            for (i, p) in points.iter().enumerate() {
                d.push_str(&format!("{}{:.2} {:.2}", if i == 0 { "M" } else { "L" }, px(p.0), py(p.1)));
            }
            svg.push_str(&format!(
                "<path d=\"{d}\" stroke=\"blue\" fill=\"none\" stroke-width=\"1.5\"/>\n"
            ));
        }
        PlotKind::Scatter => {}
    }
    for p in &points {
        svg.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"blue\"/>\n",
            px(p.0),
            py(p.1)
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> PlotSpec {
        PlotSpec {
            title: "TEST".into(),
            x_col: "x".into(),
            y_col: "y".into(),
            log_x: false,
            kind: PlotKind::Scatter,
            reference: None,
        }
    }

    #[test]
    fn empty_table_renders_no_data() {
        let svg = emit_plot("x,y\r\n", &spec()).unwrap();
        assert!(svg.starts_with("<svg"));
        // the NO DATA banner is one big stroked path at size 24
        assert!(svg.contains("stroke-width=\"2\""));
        // deterministic
        assert_eq!(svg, emit_plot("x,y\r\n", &spec()).unwrap());
    }

    #[test]
    fn single_point_marker() {
        let svg = emit_plot("x,y\r\n1,1\r\n", &spec()).unwrap();
        assert_eq!(svg.matches("<circle").count(), 1);
    }

    #[test]
    fn missing_column_named() {
        let err = emit_plot("a,b\r\n1,2\r\n", &spec()).unwrap_err();
        match err {
            HarnessError::Validation { field, .. } => assert_eq!(field, "x"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reference_curve_emitted() {
        let mut s = spec();
        s.log_x = true;
        s.reference = Some(ReferenceCurve { kappa: 1.0, scale: 1.0 });
        let svg = emit_plot("x,y\r\n10,2\r\n100,4\r\n", &s).unwrap();
        assert!(svg.contains("stroke-dasharray"));
        assert_eq!(svg.matches("<circle").count(), 2);
    }

    #[test]
    fn csv_parser_handles_quotes() {
        let (h, rows) = parse_csv("a,b\r\n\"x,1\",\"say \"\"hi\"\"\"\r\n2,3\r\n");
        assert_eq!(h, vec!["a", "b"]);
        assert_eq!(rows[0], vec!["x,1", "say \"hi\""]);
        assert_eq!(rows[1], vec!["2", "3"]);
    }

    #[test]
    fn deterministic_bytes() {
        let table = "x,y\r\n1,2\r\n3,4\r\n5,1\r\n";
        let a = emit_plot(table, &spec()).unwrap();
        let b = emit_plot(table, &spec()).unwrap();
        assert_eq!(a, b);
    }
}
