//! Run manifests, canonical config hashing, schema pre-validation and SVG
//! plots of experiment reports.

use crate::error::{Error, Result};
use crate::special::{norm_cdf, phi, psi_inv};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;

/// Keys accepted at the top level of an experiment config.
pub const CONFIG_KEYS: [&str; 8] = [
    "model",
    "subordinator",
    "level",
    "windows",
    "replicates",
    "seed",
    "normalization",
    "rank",
];
/// Keys an experiment config must provide.
pub const REQUIRED_KEYS: [&str; 6] = ["model", "subordinator", "level", "windows", "replicates", "seed"];
const WINDOW_KEYS: [&str; 3] = ["extents", "mesh", "origin"];

/// JSON with object keys sorted and no whitespace.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json's default map is ordered by key
    let v = serde_json::to_value(value)?;
    Ok(serde_json::to_string(&v)?)
}

/// Hex SHA-256 of the canonical JSON form.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let text = canonical_json(value)?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

/// Every schema problem of a raw experiment config, as `path: message`.
pub fn schema_violations(raw: &Value) -> Vec<String> {
    let mut out = Vec::new();
    let Some(obj) = raw.as_object() else {
        out.push("$: config must be a JSON object".to_string());
        return out;
    };
    for key in obj.keys() {
        if !CONFIG_KEYS.contains(&key.as_str()) {
            out.push(format!("{key}: unknown key"));
        }
    }
    for key in REQUIRED_KEYS {
        if !obj.contains_key(key) {
            out.push(format!("{key}: missing required key"));
        }
    }
    match obj.get("windows") {
        Some(Value::Array(ws)) => {
            for (i, w) in ws.iter().enumerate() {
                match w.as_object() {
                    Some(o) => {
                        for k in o.keys() {
                            if !WINDOW_KEYS.contains(&k.as_str()) {
                                out.push(format!("windows[{i}].{k}: unknown key"));
                            }
                        }
                        if !o.contains_key("extents") {
                            out.push(format!("windows[{i}].extents: missing required key"));
                        }
                    }
                    None => out.push(format!("windows[{i}]: must be an object")),
                }
            }
        }
        Some(_) => out.push("windows: must be an array".to_string()),
        None => {}
    }
    for key in ["level"] {
        if let Some(v) = obj.get(key) {
            if !v.is_number() {
                out.push(format!("{key}: must be a number"));
            }
        }
    }
    for key in ["replicates", "seed"] {
        if let Some(v) = obj.get(key) {
            if !v.is_u64() {
                out.push(format!("{key}: must be a nonnegative integer"));
            }
        }
    }
    if let Some(v) = obj.get("rank") {
        if !(v.is_u64() || v.is_null()) {
            out.push("rank: must be a nonnegative integer".to_string());
        }
    }
    out
}

/// Parses a config after listing all schema problems at once.
pub fn parse_config<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    let raw: Value = serde_json::from_str(text)?;
    let problems = schema_violations(&raw);
    if !problems.is_empty() {
        return Err(Error::Format(problems.join("; ")));
    }
    Ok(serde_json::from_value(raw)?)
}

/// Provenance record written next to every run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub tool_version: String,
    pub seed: u64,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 400.0;
const PANEL: f64 = 380.0;
const MARGIN: f64 = 40.0;

fn bins(n: usize) -> usize {
    ((n as f64).sqrt().round() as usize).clamp(10, 60)
}

/// Self-contained SVG: histogram with the N(0, 1) density (left) and a
/// normal QQ plot (right).
pub fn histogram_qq_svg(values: &[f64], title: &str) -> Result<String> {
    let mut xs: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if xs.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: xs.len(),
        });
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    let lo = xs[0].min(-4.0);
    let hi = xs[n - 1].max(4.0);
    let k = bins(n);
    let width = (hi - lo) / k as f64;
    let mut counts = vec![0usize; k];
    for &x in &xs {
        counts[(((x - lo) / width) as usize).min(k - 1)] += 1;
    }
    let dens: Vec<f64> = counts.iter().map(|c| *c as f64 / (n as f64 * width)).collect();
    let ymax = dens.iter().copied().fold(phi(0.0), f64::max) * 1.05;
    let px = |x: f64| MARGIN + (x - lo) / (hi - lo) * (PANEL - MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - y / ymax * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, WIDTH / 2.0, escape(title));
    for (i, d) in dens.iter().enumerate() {
        let x0 = px(lo + i as f64 * width);
        let x1 = px(lo + (i + 1) as f64 * width);
        let _ = writeln!(
            s,
            r##"<rect x="{x0:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#9ecae1" stroke="#3182bd" stroke-width="0.5"/>"##,
            py(*d),
            x1 - x0,
            py(0.0) - py(*d)
        );
    }
    let curve: Vec<String> = (0..=200)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / 200.0;
            format!("{:.2},{:.2}", px(x), py(phi(x)))
        })
        .collect();
    let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#d62728" stroke-width="1.5"/>"##, curve.join(" "));
    axes(&mut s, MARGIN, PANEL, "standardized", "density");

    // QQ panel
    let off = PANEL + 2.0 * MARGIN;
    let qmin = psi_inv(1.0 - 0.5 / n as f64).abs().max(xs[0].abs()).max(xs[n - 1].abs()).min(8.0);
    let qx = |x: f64| off + (x + qmin) / (2.0 * qmin) * (PANEL - MARGIN);
    let qy = |y: f64| HEIGHT - MARGIN - (y.clamp(-qmin, qmin) + qmin) / (2.0 * qmin) * (HEIGHT - 2.0 * MARGIN);
    let _ = writeln!(
        s,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#d62728"/>"##,
        qx(-qmin),
        qy(-qmin),
        qx(qmin),
        qy(qmin)
    );
    let step = (n / 2000).max(1);
    for (i, &x) in xs.iter().enumerate().step_by(step) {
        let q = -psi_inv((i as f64 + 0.5) / n as f64);
        let _ = writeln!(s, r##"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="#3182bd"/>"##, qx(q), qy(x));
    }
    axes(&mut s, off, off + PANEL - MARGIN, "normal quantile", "sample quantile");
    s.push_str("</svg>\n");
    Ok(s)
}

fn axes(s: &mut String, x0: f64, x1: f64, xlabel: &str, ylabel: &str) {
    let y = HEIGHT - MARGIN;
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y}" x2="{x1}" y2="{y}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{MARGIN}" x2="{x0}" y2="{y}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#, (x0 + x1) / 2.0, HEIGHT - 10.0);
    let _ = writeln!(
        s,
        r#"<text x="12" y="{}" transform="rotate(-90 12 {})" text-anchor="middle">{ylabel}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Largest gap between the empirical CDF and Φ, for plot captions.
pub fn normal_gap(values: &[f64]) -> f64 {
    let mut xs = values.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = norm_cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limit_lab::ExperimentConfig;
    use serde_json::json;

    fn sample() -> Value {
        json!({
            "seed": 7,
            "model": {"kind": "power_law_iso", "eta": 0.4},
            "subordinator": {"kind": "identity"},
            "level": 0.0,
            "windows": [{"extents": [64.0]}, {"extents": [128.0], "mesh": 1.0}],
            "replicates": 200
        })
    }

    #[test]
    fn canonical_form_is_sorted_and_compact() {
        let c = canonical_json(&json!({"b": 1, "a": {"d": [1, 2], "c": null}})).unwrap();
        assert_eq!(c, r#"{"a":{"c":null,"d":[1,2]},"b":1}"#);
        let h = config_hash(&json!({"b": 1, "a": 2})).unwrap();
        assert_eq!(h, config_hash(&json!({"a": 2, "b": 1})).unwrap());
        assert_eq!(h.len(), 64);
    }

    #[test]
    fn config_round_trip() {
        let cfg: ExperimentConfig = parse_config(&sample().to_string()).unwrap();
        let text = canonical_json(&cfg).unwrap();
        let back: ExperimentConfig = parse_config(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(text, canonical_json(&back).unwrap());
    }

    #[test]
    fn schema_lists_every_problem() {
        let mut v = sample();
        let o = v.as_object_mut().unwrap();
        o.remove("replicates");
        o.insert("replicate".into(), json!(3));
        o.insert("windows".into(), json!([{"extent": [3.0]}]));
        let p = schema_violations(&v);
        assert!(p.contains(&"replicate: unknown key".to_string()));
        assert!(p.contains(&"replicates: missing required key".to_string()));
        assert!(p.contains(&"windows[0].extent: unknown key".to_string()));
        assert!(p.contains(&"windows[0].extents: missing required key".to_string()));
        assert!(schema_violations(&sample()).is_empty());
        assert!(matches!(parse_config::<ExperimentConfig>(&v.to_string()), Err(Error::Format(_))));
    }

    #[test]
    fn svg_is_well_formed() {
        let xs: Vec<f64> = (1..500).map(|i| psi_inv(i as f64 / 500.0)).collect();
        let svg = histogram_qq_svg(&xs, "a < b").unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt; b"));
        assert!(normal_gap(&xs) < 0.01);
    }
}
