//! Serialization: the density/potential JSON schema, result documents
//! (schema "torus-vrep/1"), CSV profiles and minimal SVG line plots.
//!
//! Every float is written with 17 significant digits ({:.16e}), which
//! round-trips f64 exactly and makes outputs byte-identical across runs
//! with the same inputs. Files are UTF-8 with "\n" line endings.

use num_complex::Complex64;
use serde::Deserialize;
use std::io::Write;

use crate::error::{Error, Result};
use crate::fourier::TorusFunction;
use crate::spaces::{DensityField, PotentialClass};

/// Schema tag carried by every result document.
pub const SCHEMA: &str = "torus-vrep/1";

/// 17-significant-digit float, exact for f64 round trips.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "null".to_string()
    } else if x > 0.0 {
        "1e999".to_string()
    } else {
        "-1e999".to_string()
    }
}

/// Order-preserving JSON value; objects keep insertion order so output
/// bytes are deterministic.
#[derive(Debug, Clone)]
pub enum Json {
    Null,
    Bool(bool),
    Int(i64),
    Num(f64),
    Str(String),
    Arr(Vec<Json>),
    Obj(Vec<(String, Json)>),
}

impl Json {
    pub fn obj() -> Self {
        Json::Obj(Vec::new())
    }

    pub fn field(mut self, key: &str, value: Json) -> Self {
        if let Json::Obj(fields) = &mut self {
            fields.push((key.to_string(), value));
        }
        self
    }

    pub fn floats(values: impl IntoIterator<Item = f64>) -> Self {
        Json::Arr(values.into_iter().map(Json::Num).collect())
    }

    pub fn render(&self, out: &mut String) {
        match self {
            Json::Null => out.push_str("null"),
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::Int(i) => out.push_str(&i.to_string()),
            Json::Num(x) => out.push_str(&fmt_f64(*x)),
            Json::Str(s) => {
                out.push('"');
                for c in s.chars() {
                    match c {
                        '"' => out.push_str("\\\""),
                        '\\' => out.push_str("\\\\"),
                        '\n' => out.push_str("\\n"),
                        '\t' => out.push_str("\\t"),
                        '\r' => out.push_str("\\r"),
                        c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
                        c => out.push(c),
                    }
                }
                out.push('"');
            }
            Json::Arr(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    item.render(out);
                }
                out.push(']');
            }
            Json::Obj(fields) => {
                out.push('{');
                for (i, (k, v)) in fields.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    Json::Str(k.clone()).render(out);
                    out.push(':');
                    v.render(out);
                }
                out.push('}');
            }
        }
    }

    pub fn to_string_pretty_enough(&self) -> String {
        let mut s = String::new();
        self.render(&mut s);
        s.push('\n');
        s
    }
}

fn coeff_arrays(coeffs: &[Complex64]) -> (Json, Json) {
    (
        Json::floats(coeffs.iter().map(|c| c.re)),
        Json::floats(coeffs.iter().map(|c| c.im)),
    )
}

/// Density record: {"kind":"density","n_particles":N,"cutoff":K,
/// "coeff_re":[...],"coeff_im":[...],"samples":[...],"grid":M} with
/// coefficients ordered k = -K..K. The writer emits both coefficient and
/// sample forms; the reader accepts either.
pub fn density_to_json(rho: &DensityField) -> Json {
    let profile = rho.profile();
    let (re, im) = coeff_arrays(profile.coeffs());
    Json::obj()
        .field("kind", Json::Str("density".into()))
        .field("n_particles", Json::Int(rho.n_particles() as i64))
        .field("cutoff", Json::Int(rho.cutoff() as i64))
        .field("coeff_re", re)
        .field("coeff_im", im)
        .field("samples", Json::floats(profile.samples().iter().map(|c| c.re)))
        .field("grid", Json::Int(profile.grid_len() as i64))
}

pub fn potential_to_json(v: &PotentialClass) -> Json {
    let f = v.as_function();
    let (re, im) = coeff_arrays(v.coeffs());
    Json::obj()
        .field("kind", Json::Str("potential".into()))
        .field("n_particles", Json::Int(0))
        .field("cutoff", Json::Int(v.cutoff() as i64))
        .field("coeff_re", re)
        .field("coeff_im", im)
        .field("samples", Json::floats(f.samples().iter().map(|c| c.re)))
        .field("grid", Json::Int(f.grid_len() as i64))
}

pub fn write_density(w: &mut impl Write, rho: &DensityField) -> Result<()> {
    w.write_all(density_to_json(rho).to_string_pretty_enough().as_bytes())?;
    Ok(())
}

pub fn write_potential(w: &mut impl Write, v: &PotentialClass) -> Result<()> {
    w.write_all(potential_to_json(v).to_string_pretty_enough().as_bytes())?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct FileRecord {
    kind: String,
    n_particles: Option<usize>,
    cutoff: Option<usize>,
    coeff_re: Option<Vec<f64>>,
    coeff_im: Option<Vec<f64>>,
    samples: Option<Vec<f64>>,
    #[allow(dead_code)]
    grid: Option<usize>,
}

fn record_from_str(text: &str) -> Result<FileRecord> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("{e}")))
}

fn record_coeffs(rec: &FileRecord) -> Result<Option<Vec<Complex64>>> {
    match (&rec.coeff_re, &rec.coeff_im) {
        (Some(re), Some(im)) => {
            if re.len() != im.len() {
                return Err(Error::Parse(format!(
                    "coeff_re has {} entries but coeff_im has {}",
                    re.len(),
                    im.len()
                )));
            }
            if re.len() % 2 != 1 {
                return Err(Error::Parse(
                    "coefficient arrays must have odd length 2K+1".into(),
                ));
            }
            Ok(Some(
                re.iter()
                    .zip(im)
                    .map(|(&a, &b)| Complex64::new(a, b))
                    .collect(),
            ))
        }
        (None, None) => Ok(None),
        _ => Err(Error::Parse(
            "coeff_re and coeff_im must be given together".into(),
        )),
    }
}

pub fn read_density(text: &str) -> Result<DensityField> {
    let rec = record_from_str(text)?;
    if rec.kind != "density" {
        return Err(Error::Parse(format!(
            "expected kind \"density\", found {:?}",
            rec.kind
        )));
    }
    let n = rec
        .n_particles
        .ok_or_else(|| Error::Parse("density record needs n_particles".into()))?;
    if let Some(coeffs) = record_coeffs(&rec)? {
        return DensityField::from_coeffs(coeffs, n);
    }
    let samples = rec
        .samples
        .as_ref()
        .ok_or_else(|| Error::Parse("density record needs coefficients or samples".into()))?;
    let cutoff = rec
        .cutoff
        .ok_or_else(|| Error::Parse("sample-form density needs a cutoff".into()))?;
    DensityField::from_samples(samples, cutoff, n)
}

pub fn read_potential(text: &str) -> Result<PotentialClass> {
    let rec = record_from_str(text)?;
    if rec.kind != "potential" {
        return Err(Error::Parse(format!(
            "expected kind \"potential\", found {:?}",
            rec.kind
        )));
    }
    if let Some(coeffs) = record_coeffs(&rec)? {
        return Ok(PotentialClass::from_coeffs(coeffs));
    }
    let samples = rec
        .samples
        .as_ref()
        .ok_or_else(|| Error::Parse("potential record needs coefficients or samples".into()))?;
    let cutoff = rec
        .cutoff
        .ok_or_else(|| Error::Parse("sample-form potential needs a cutoff".into()))?;
    let f = TorusFunction::from_samples(samples, cutoff)?;
    Ok(PotentialClass::from_function(&f))
}

/// CSV with a header row; all numeric cells at 17 significant digits.
pub fn write_csv(w: &mut impl Write, headers: &[&str], columns: &[Vec<f64>]) -> Result<()> {
    assert_eq!(headers.len(), columns.len());
    let rows = columns.first().map_or(0, |c| c.len());
    for c in columns {
        assert_eq!(c.len(), rows, "csv columns must have equal length");
    }
    let mut line = String::new();
    line.push_str(&headers.join(","));
    line.push('\n');
    w.write_all(line.as_bytes())?;
    for r in 0..rows {
        let mut line = String::new();
        for (i, c) in columns.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&fmt_f64(c[r]));
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Minimal SVG line plot: one polyline per series on a shared frame.
/// No plotting dependency; CSV remains the canonical output.
pub fn write_svg(
    w: &mut impl Write,
    title: &str,
    series: &[(&str, &[f64], &[f64])],
) -> Result<()> {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const MARGIN: f64 = 50.0;
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for (_, xs, ys) in series {
        for &x in *xs {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
        }
        for &y in *ys {
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
    }
    if !(xmin.is_finite() && ymin.is_finite()) {
        return Err(Error::Parse("svg plot needs finite data".into()));
    }
    if (xmax - xmin).abs() < 1e-300 {
        xmax = xmin + 1.0;
    }
    if (ymax - ymin).abs() < 1e-300 {
        ymax = ymin + 1.0;
    }
    let sx = |x: f64| MARGIN + (x - xmin) / (xmax - xmin) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - ymin) / (ymax - ymin) * (H - 2.0 * MARGIN);

    writeln!(
        w,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    )?;
    writeln!(w, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>")?;
    writeln!(
        w,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>",
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    )?;
    writeln!(
        w,
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{}</text>",
        W / 2.0,
        title
    )?;
    for (t, anchor, x, y) in [
        (format!("{xmin:.3}"), "start", MARGIN, H - MARGIN + 16.0),
        (format!("{xmax:.3}"), "end", W - MARGIN, H - MARGIN + 16.0),
        (format!("{ymin:.3}"), "end", MARGIN - 4.0, H - MARGIN),
        (format!("{ymax:.3}"), "end", MARGIN - 4.0, MARGIN + 4.0),
    ] {
        writeln!(
            w,
            "<text x=\"{x}\" y=\"{y}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"{anchor}\">{t}</text>"
        )?;
    }
    for (i, (name, xs, ys)) in series.iter().enumerate() {
        let color = colors[i % colors.len()];
        let points: Vec<String> = xs
            .iter()
            .zip(*ys)
            .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        writeln!(
            w,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            points.join(" ")
        )?;
        writeln!(
            w,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{name}</text>",
            W - MARGIN + 4.0 - 90.0,
            MARGIN + 16.0 * (i + 1) as f64
        )?;
    }
    writeln!(w, "</svg>")?;
    Ok(())
}
