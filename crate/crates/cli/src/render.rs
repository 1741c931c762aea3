//! Token heat rendering for explanations.

use std::fmt::Write as _;

use iega_core::data::{Example, Polarity};

pub const BUCKETS: usize = 5;

/// Intensity bucket in `0..BUCKETS`, relative to the largest weight.
pub fn bucket(alpha: f64, max_alpha: f64) -> usize {
    if max_alpha <= 0.0 || alpha <= 0.0 {
        return 0;
    }
    let b = (alpha / max_alpha * BUCKETS as f64).ceil() as usize;
    b.clamp(1, BUCKETS) - 1
}

pub fn buckets(alpha: &[f64]) -> Vec<usize> {
    let max = alpha.iter().cloned().fold(0.0, f64::max);
    alpha.iter().map(|&a| bucket(a, max)).collect()
}

/// One explained example ready for rendering.
#[derive(Debug, Clone)]
pub struct Explained<'a> {
    pub example: &'a Example,
    pub predicted: Polarity,
    pub alpha: Vec<f64>,
}

/// Plain text: `token{bucket}`, aspect tokens in brackets, gold opinion
/// words wrapped in underscores.
pub fn text(items: &[Explained]) -> String {
    let mut out = String::new();
    for item in items {
        let e = item.example;
        let _ = writeln!(
            out,
            "{}  predicted={} gold={}",
            e.id,
            item.predicted.code(),
            e.polarity.code()
        );
        let heat = buckets(&item.alpha);
        let mut line = String::from(" ");
        for (i, tok) in e.tokens.iter().enumerate() {
            let mut t = tok.clone();
            if e.gold_opinions().contains(&i) {
                t = format!("_{t}_");
            }
            if i == e.aspect_span[0] {
                line.push_str(" [");
            } else {
                line.push(' ');
            }
            let _ = write!(line, "{t}{{{}}}", heat[i]);
            if i + 1 == e.aspect_span[1] {
                line.push(']');
            }
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Standalone HTML page with inline styles only.
pub fn html(items: &[Explained]) -> String {
    let mut out = String::from(
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>saliency</title></head>\n\
         <body style=\"font-family: sans-serif; line-height: 2;\">\n",
    );
    for item in items {
        let e = item.example;
        let heat = buckets(&item.alpha);
        let _ = writeln!(
            out,
            "<div style=\"margin-bottom: 1em;\"><div style=\"color: #555;\">{} predicted={} gold={}</div>",
            escape(&e.id),
            item.predicted.code(),
            e.polarity.code()
        );
        out.push_str("<div>");
        for (i, tok) in e.tokens.iter().enumerate() {
            let mut style = format!(
                "background-color: rgba(214, 39, 40, {:.2}); padding: 2px;",
                heat[i] as f64 / (BUCKETS - 1) as f64 * 0.85
            );
            if e.gold_opinions().contains(&i) {
                style.push_str(" text-decoration: underline;");
            }
            let mut tok = escape(tok);
            if i == e.aspect_span[0] {
                tok = format!("[{tok}");
            }
            if i + 1 == e.aspect_span[1] {
                tok.push(']');
            }
            let _ = write!(
                out,
                "<span title=\"{:.4}\" style=\"{style}\">{tok}</span> ",
                item.alpha[i]
            );
        }
        out.push_str("</div></div>\n");
    }
    out.push_str("</body></html>\n");
    out
}
