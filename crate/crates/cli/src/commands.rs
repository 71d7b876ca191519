use std::path::Path;

use rayon::prelude::*;
use tdlimit::{
    bifurcation_scan, iterate, lyapunov_spectrum, step, td_error, validate_conversion,
    BehaviorProfile, Game,
};

use crate::config::Run;
use crate::error::{CliError, Result};
use crate::output::{num, profile_columns, sibling, write_text, Table};

/// Largest product grid `traj --grid` will evaluate.
const MAX_GRID_POINTS: usize = 4_000_000;

pub fn traj(run: &Run, out: Option<&Path>) -> Result<()> {
    let cfg = &run.config;
    let (n, z, m) = run.x0.dims();
    if cfg.grid.is_some() && out.is_none() {
        return Err(CliError::config("--grid needs --out"));
    }
    let steps = cfg.steps.expect("resolved");
    let epsilon = cfg.epsilon.expect("resolved");
    let traj = iterate(&run.game, &run.x0, &run.params, steps, epsilon)?;

    let mut cols = vec!["t".to_string()];
    cols.extend(profile_columns(n, z, m));
    cols.extend((0..n).map(|i| format!("reward_{i}")));
    let mut table = Table::create(out, &cfg.header(), &cols)?;
    for (t, (x, perf)) in traj.points.iter().zip(&traj.performance).enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(x.to_flat().into_iter().map(num));
        row.extend(perf.iter().copied().map(num));
        table.row(&row)?;
    }
    table.finish()?;

    let meta = serde_json::json!({
        "converged_at": traj.converged_at,
        "epsilon": traj.epsilon,
    })
    .to_string();
    match out {
        Some(path) => write_text(&sibling(path, "meta.json"), &(meta + "\n"))?,
        None => eprintln!("{meta}"),
    }

    if let (Some(g), Some(path)) = (cfg.grid, out) {
        td_grid(run, g, &sibling(path, "grid.csv"))?;
    }
    Ok(())
}

/// Direction field for two-action games. For every state and every cell of a
/// `g^N` grid over the agents' first-action probabilities in that state, the
/// TD-error gap `TD_{s0} - TD_{s1}` and the displacement of the first-action
/// probability under one step are averaged over the grid of all other states.
fn td_grid(run: &Run, g: usize, path: &Path) -> Result<()> {
    let (n, z, _) = run.x0.dims();
    let coords = n * z;
    let total = u32::try_from(coords)
        .ok()
        .and_then(|c| g.checked_pow(c))
        .filter(|&t| t <= MAX_GRID_POINTS)
        .ok_or_else(|| {
            CliError::config(format!(
                "grid: {g}^{coords} profiles exceeds the limit of {MAX_GRID_POINTS}"
            ))
        })?;
    let centre = |k: usize| (k as f64 + 0.5) / g as f64;
    // Mixed-radix digits, coordinate `s * n + i` first.
    let digits = |mut idx: usize| {
        let mut d = vec![0; coords];
        for c in (0..coords).rev() {
            d[c] = idx % g;
            idx /= g;
        }
        d
    };

    let per_point: Vec<Vec<f64>> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let first: Vec<f64> = digits(idx).into_iter().map(centre).collect();
            let x = BehaviorProfile::from_first_action(n, z, &first)?;
            let td = td_error(&run.game, &x, &run.params)?.errors;
            let next = step(&run.game, &x, &run.params)?;
            let mut v = Vec::with_capacity(2 * coords);
            for s in 0..z {
                for i in 0..n {
                    v.push(td[[i, s, 0]] - td[[i, s, 1]]);
                }
                for i in 0..n {
                    v.push(next.get(i, s, 0) - x.get(i, s, 0));
                }
            }
            Ok(v)
        })
        .collect::<tdlimit::Result<_>>()?;

    let cells = g.pow(n as u32);
    let mut sums = vec![vec![0.0; 2 * n]; z * cells];
    for (idx, v) in per_point.iter().enumerate() {
        let d = digits(idx);
        for s in 0..z {
            let cell = d[s * n..(s + 1) * n].iter().fold(0, |acc, &k| acc * g + k);
            let acc = &mut sums[s * cells + cell];
            for (a, x) in acc.iter_mut().zip(&v[s * 2 * n..(s + 1) * 2 * n]) {
                *a += x;
            }
        }
    }
    let count = (total / cells) as f64;

    let mut cols = vec!["state".to_string()];
    for prefix in ["x", "td", "dx"] {
        cols.extend((0..n).map(|i| format!("{prefix}_{i}")));
    }
    let mut table = Table::create(Some(path), &run.config.header(), &cols)?;
    for s in 0..z {
        for cell in 0..cells {
            let mut row = vec![s.to_string()];
            let mut rest = cell;
            let mut xs = vec![0.0; n];
            for i in (0..n).rev() {
                xs[i] = centre(rest % g);
                rest /= g;
            }
            row.extend(xs.into_iter().map(num));
            row.extend(sums[s * cells + cell].iter().map(|v| num(v / count)));
            table.row(&row)?;
        }
    }
    table.finish()
}

pub fn scan(run: &Run, out: Option<&Path>) -> Result<()> {
    let cfg = &run.config;
    let (n, z, m) = run.x0.dims();
    let transient = cfg.transient.expect("resolved");
    let blocks = bifurcation_scan(
        &run.game,
        &run.x0,
        &run.params,
        cfg.axis.expect("resolved"),
        cfg.values.as_deref().expect("resolved"),
        cfg.record.expect("resolved"),
        transient,
    )?;

    let mut cols = vec!["param_value".to_string(), "t".to_string()];
    cols.extend(profile_columns(n, z, m));
    cols.extend(["lyap_max".to_string(), "error".to_string()]);
    let mut table = Table::create(out, &cfg.header(), &cols)?;
    for block in &blocks {
        if let Some(err) = &block.error {
            let mut row = vec![num(block.param_value)];
            row.extend(std::iter::repeat_n(String::new(), n * z * m + 2));
            row.push(err.clone());
            table.row(&row)?;
            continue;
        }
        let lyap = block.lyap_max.map(num).unwrap_or_default();
        for (k, x) in block.points.iter().enumerate() {
            let mut row = vec![num(block.param_value), (transient + k).to_string()];
            row.extend(x.to_flat().into_iter().map(num));
            row.extend([lyap.clone(), String::new()]);
            table.row(&row)?;
        }
    }
    table.finish()
}

pub fn lyap(run: &Run, out: Option<&Path>) -> Result<()> {
    let cfg = &run.config;
    let spectrum = lyapunov_spectrum(
        &run.game,
        &run.x0,
        &run.params,
        cfg.steps.expect("resolved"),
        cfg.transient.expect("resolved"),
    )?;
    let mut cols: Vec<String> = (0..spectrum.exponents.len())
        .map(|k| format!("lambda_{k}"))
        .collect();
    cols.push("nondifferentiable_steps".into());
    let mut table = Table::create(out, &cfg.header(), &cols)?;
    let mut row: Vec<String> = spectrum.exponents.iter().copied().map(num).collect();
    row.push(spectrum.nondifferentiable_steps.to_string());
    table.row(&row)?;
    table.finish()
}

pub fn validate(run: &Run, out: Option<&Path>) -> Result<()> {
    let cfg = &run.config;
    let report = validate_conversion(
        &run.game,
        &run.x0,
        &run.params,
        cfg.ks.as_deref().expect("resolved"),
        cfg.seed.expect("resolved"),
        cfg.seeds.expect("resolved"),
    )?;
    let cols = ["k", "max_deviation", "tv_distance", "slope"].map(String::from);
    let mut table = Table::create(out, &cfg.header(), &cols)?;
    for r in &report.rows {
        table.row(&[r.k.to_string(), num(r.max_deviation), num(r.tv_distance), num(report.slope)])?;
    }
    table.finish()
}

/// Writes the game as a loadable game file, without a config line.
pub fn export_game(game: &Game, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(&game.to_json()).expect("game serializes") + "\n";
    match out {
        Some(path) => write_text(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
