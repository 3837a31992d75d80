use std::io::Write;

use anyhow::{bail, ensure, Context, Result};
use oap_scaling::logdomain::log_sinkhorn_scale;
use oap_scaling::sinkhorn::ScaleOptions;
use oap_scaling::Matrix;

/// Largest dimension accepted by `trace`.
pub const TRACE_MAX_DIM: usize = 64;

pub struct TraceRow {
    pub p: f64,
    pub i: usize,
    pub j: usize,
    pub x: f64,
}

/// Parses `i,j;k,l` with 1-based indices into 0-based pairs.
pub fn parse_entries(s: &str) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let Some((i, j)) = part.split_once(',') else { bail!("entry `{part}` is not `i,j`") };
        let i: usize = i.trim().parse().with_context(|| format!("bad row in `{part}`"))?;
        let j: usize = j.trim().parse().with_context(|| format!("bad column in `{part}`"))?;
        ensure!(i >= 1 && j >= 1, "indices are 1-based, got `{part}`");
        out.push((i - 1, j - 1));
    }
    ensure!(!out.is_empty(), "no trace entries given");
    Ok(out)
}

/// Parses comma-separated values and `start:stop[:step]` ranges (inclusive).
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let num = |t: &str| t.trim().parse::<f64>().with_context(|| format!("bad number `{t}`"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let f: Vec<&str> = part.split(':').collect();
        match f.len() {
            1 => out.push(num(f[0])?),
            2 | 3 => {
                let (a, b) = (num(f[0])?, num(f[1])?);
                let step = if f.len() == 3 { num(f[2])? } else { 1.0 };
                ensure!(step > 0.0 && a <= b, "bad range `{part}`");
                let count = ((b - a) / step + 1e-9).floor() as usize;
                out.extend((0..=count).map(|k| a + k as f64 * step));
            }
            _ => bail!("bad grid item `{part}`"),
        }
    }
    ensure!(!out.is_empty(), "empty p grid");
    ensure!(out.iter().all(|&p| p > 0.0 && p.is_finite()), "p values must be positive");
    Ok(out)
}

/// Scales `a` tightly at every `p` of the grid and collects the requested entries.
pub fn trace(a: &Matrix, entries: &[(usize, usize)], grid: &[f64]) -> Result<Vec<TraceRow>> {
    let n = a.dim();
    ensure!(n <= TRACE_MAX_DIM, "trace needs n ≤ {TRACE_MAX_DIM}, got {n}");
    for &(i, j) in entries {
        ensure!(i < n && j < n, "entry ({}, {}) outside a {n}×{n} matrix", i + 1, j + 1);
    }
    let opts = ScaleOptions::for_dim(n).with_epsilon(1e-12).with_max_iters(100_000);
    let mut rows = Vec::with_capacity(grid.len() * entries.len());
    for &p in grid {
        let (_, r) = log_sinkhorn_scale(a, p, &opts.with_p(p))?;
        for &(i, j) in entries {
            rows.push(TraceRow { p, i, j, x: r.x.get(i, j) });
        }
    }
    Ok(rows)
}

pub fn write_csv(w: &mut impl Write, rows: &[TraceRow]) -> Result<()> {
    writeln!(w, "p,i,j,x,log10_x")?;
    for r in rows {
        writeln!(w, "{},{},{},{:.17e},{:.17e}", r.p, r.i + 1, r.j + 1, r.x, r.x.log10())?;
    }
    Ok(())
}
