//! Scores a few hand-made fusions of a synthetic pair and prints the report CSV.

use densefuse::metrics::{write_report, MetricRow};
use densefuse::synthetic::{infrared_scene, visible_scene};
use densefuse::Tensor;

fn main() -> densefuse::Result<()> {
    let ir = infrared_scene(64, 64, 5);
    let vis = visible_scene(64, 64, 5);
    let average = ir.zip_map(&vis, |a, b| 0.5 * (a + b))?;
    let maximum = ir.zip_map(&vis, f32::max)?;
    let flat = Tensor::full(ir.shape(), 0.5);
    let rows = vec![
        MetricRow::compute("average", "manual", "", &average, &ir, &vis)?,
        MetricRow::compute("maximum", "manual", "", &maximum, &ir, &vis)?,
        MetricRow::compute("visible_only", "manual", "", &vis, &ir, &vis)?,
        MetricRow::compute("flat", "manual", "", &flat, &ir, &vis)?,
    ];
    write_report(&mut std::io::stdout().lock(), &rows)
}
