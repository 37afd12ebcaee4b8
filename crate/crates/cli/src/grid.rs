use anyhow::{bail, Context, Result};

// Grid points are snapped to this resolution so 0.1 + 0.05 * k prints cleanly.
const SNAP: f64 = 1e9;

fn snap(x: f64) -> f64 {
    (x * SNAP).round() / SNAP
}

/// Parses `a,b,c` or `start:end:step` (inclusive of `end`).
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let spec = spec.trim();
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [start, end, step] = parts[..] else {
            bail!("grid must be start:end:step, got {spec:?}");
        };
        let start: f64 = start.trim().parse().with_context(|| format!("bad start {start:?}"))?;
        let end: f64 = end.trim().parse().with_context(|| format!("bad end {end:?}"))?;
        let step: f64 = step.trim().parse().with_context(|| format!("bad step {step:?}"))?;
        if !step.is_finite() || step <= 0.0 {
            bail!("grid step must be positive, got {step}");
        }
        if end < start {
            bail!("grid end {end} is below start {start}");
        }
        let count = ((end - start) / step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| snap(start + i as f64 * step)).collect())
    } else {
        spec.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .with_context(|| format!("bad number {s:?}"))
            })
            .collect()
    }
}
