//! No-reference fusion quality metrics: entropy, SSIM_a and SCD.

use std::io::Write;

use crate::error::{arg_err, shape_err, Result};
use crate::loss::ssim;
use crate::tensor::Tensor;

/// 8-bit gray level of a `[0, 1]` value, rounding half up.
pub fn quantize(v: f32) -> u8 {
    (v as f64 * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

fn check_single_channel(t: &Tensor, what: &str) -> Result<()> {
    if t.shape().c != 1 {
        return shape_err(format!("{what} expects a single-channel image"));
    }
    Ok(())
}

/// Shannon entropy (bits) of the 256-bin gray-level histogram.
pub fn entropy(image: &Tensor) -> Result<f64> {
    check_single_channel(image, "entropy")?;
    if image.is_empty() {
        return arg_err("entropy of an empty image");
    }
    let mut hist = [0u64; 256];
    for &v in image.data() {
        if !(0.0..=1.0).contains(&v) {
            return arg_err(format!("pixel value {v} outside [0, 1]"));
        }
        hist[quantize(v) as usize] += 1;
    }
    let total = image.len() as f64;
    let en = hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum::<f64>();
    // A single bin yields -1·log2(1) = -0.
    Ok(en.max(0.0))
}

/// Mean SSIM of the fused image against both sources.
pub fn ssim_a(fused: &Tensor, source1: &Tensor, source2: &Tensor) -> Result<f64> {
    fused.expect_same_shape(source1)?;
    fused.expect_same_shape(source2)?;
    let f = fused.cast::<f64>();
    let s1 = ssim(&f, &source1.cast::<f64>())?;
    let s2 = ssim(&f, &source2.cast::<f64>())?;
    Ok((s1 + s2) * 0.5)
}

/// Pearson correlation; 0 when either argument has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let constant = |v: &[f64]| v.iter().all(|&x| x == v[0]);
    if a.is_empty() || constant(a) || constant(b) {
        return 0.0;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    (cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0)
}

/// Sum of correlations of differences: `r(F − I2, I1) + r(F − I1, I2)`.
pub fn scd(fused: &Tensor, source1: &Tensor, source2: &Tensor) -> Result<f64> {
    fused.expect_same_shape(source1)?;
    fused.expect_same_shape(source2)?;
    if fused.len() < 2 {
        return arg_err("SCD needs at least two pixels");
    }
    let f: Vec<f64> = fused.data().iter().map(|&v| v as f64).collect();
    let i1: Vec<f64> = source1.data().iter().map(|&v| v as f64).collect();
    let i2: Vec<f64> = source2.data().iter().map(|&v| v as f64).collect();
    let d2: Vec<f64> = f.iter().zip(&i2).map(|(a, b)| a - b).collect();
    let d1: Vec<f64> = f.iter().zip(&i1).map(|(a, b)| a - b).collect();
    Ok(pearson(&d2, &i1) + pearson(&d1, &i2))
}

/// One row of the evaluation report.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub image_id: String,
    pub strategy: String,
    pub lambda: String,
    pub entropy: f64,
    pub ssim_a: f64,
    pub scd: f64,
}

impl MetricRow {
    pub fn compute(
        image_id: impl Into<String>,
        strategy: impl Into<String>,
        lambda: impl Into<String>,
        fused: &Tensor,
        source1: &Tensor,
        source2: &Tensor,
    ) -> Result<Self> {
        Ok(MetricRow {
            image_id: image_id.into(),
            strategy: strategy.into(),
            lambda: lambda.into(),
            entropy: entropy(fused)?,
            ssim_a: ssim_a(fused, source1, source2)?,
            scd: scd(fused, source1, source2)?,
        })
    }
}

pub const REPORT_HEADER: &str = "image_id,strategy,lambda,En,SSIM_a,SCD";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Writes the header and one row per image. Floats use shortest round-trip form.
pub fn write_report(w: &mut impl Write, rows: &[MetricRow]) -> Result<()> {
    writeln!(w, "{REPORT_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            csv_field(&r.image_id),
            csv_field(&r.strategy),
            csv_field(&r.lambda),
            r.entropy,
            r.ssim_a,
            r.scd
        )?;
    }
    Ok(())
}
