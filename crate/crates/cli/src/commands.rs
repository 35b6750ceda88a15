use anyhow::{bail, Context};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ricci_lab::classify::{
    degenerate_locus, region_label, ricci_image_sample, scatter_svg, sweep_plane, write_image_csv, write_locus_csv,
    write_sweep_csv, Axes, GridSpec, ImageOptions, Layer, RegionKind, Sampling, TraceSpec, Viewport,
};
use ricci_lab::curvature::{
    grad_norm, hessian_constrained, rank_test, ricci_coefficients, scalar_curvature, trace_t, HessianOptions,
};
use ricci_lab::dynamics::{critical_inventory, flow_traced, write_trajectory_csv, FlowParams, FlowResult};
use ricci_lab::invariants::levels;
use ricci_lab::mountainpass::{build_path_flag, build_path_wallach, extract_saddle, relax, write_telemetry_csv, RelaxParams};
use ricci_lab::space::{Candidate, CatalogShape, MetricPoint, SpaceSpec};
use ricci_lab::Error;
use serde_json::{json, Value};

use crate::config::{grid_size, pair, slice_entry, CommandKind, Format, RunConfig};

/// What a command produced, before it is written out.
pub enum Payload {
    Json(Value),
    Text(Vec<u8>),
}

/// Result status mapped to exit codes 0, 3 and 4.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status {
    Success,
    NoResult(String),
    Anomaly(String),
}

pub struct Output {
    pub payload: Payload,
    pub status: Status,
    /// Extra files written by the command.
    pub extra: Vec<std::path::PathBuf>,
}

impl Output {
    fn ok(payload: Payload) -> Self {
        Output { payload, status: Status::Success, extra: Vec::new() }
    }
}

pub fn run(kind: CommandKind, cfg: &RunConfig, format: Format) -> anyhow::Result<Output> {
    let space = cfg.load_space()?;
    match kind {
        CommandKind::Curvature => curvature(&space, cfg, format),
        CommandKind::Levels => levels_cmd(&space, cfg, format),
        CommandKind::Flow => flow_cmd(&space, cfg, format),
        CommandKind::Saddle => saddle(&space, cfg, format),
        CommandKind::Classify => classify(&space, cfg, format),
        CommandKind::Sweep => sweep(&space, cfg, format),
        CommandKind::Image => image(&space, cfg, format),
        CommandKind::Locus => locus(&space, cfg, format),
    }
}

fn candidate(space: &SpaceSpec, cfg: &RunConfig) -> anyhow::Result<Candidate> {
    let t = cfg.t.clone().context("missing --T")?;
    if t.len() != space.r() {
        bail!(Error::Length { expected: space.r(), got: t.len() });
    }
    let c = Candidate::new(t);
    if !c.definite() {
        bail!(Error::Indefinite);
    }
    Ok(c)
}

/// Rescales `x` onto `tr_g T = 1`.
fn feasible(space: &SpaceSpec, x: Vec<f64>, t: &Candidate) -> anyhow::Result<MetricPoint> {
    let p = MetricPoint::from_x(x)?;
    let tr = trace_t(space, &p, t)?;
    Ok(MetricPoint::from_x(p.x().iter().map(|v| v * tr).collect())?)
}

fn csv_text(header: &[String], rows: &[Vec<String>]) -> Vec<u8> {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

fn numbered(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn curvature(space: &SpaceSpec, cfg: &RunConfig, format: Format) -> anyhow::Result<Output> {
    let x = cfg.x.clone().context("missing --x")?;
    if x.len() != space.r() {
        bail!(Error::Length { expected: space.r(), got: x.len() });
    }
    let p = MetricPoint::from_x(x.clone())?;
    let ric = ricci_coefficients(space, &p)?.a;
    let scalar = scalar_curvature(space, &p)?;
    let rank = rank_test(space, &p)?;
    let mut report = json!({ "x": x, "ricci": ric, "scalar": scalar, "rank": rank });
    let mut grad = None;
    if cfg.t.is_some() {
        let t = candidate(space, cfg)?;
        let q = feasible(space, x.clone(), &t)?;
        let g = grad_norm(space, &q, &t)?;
        grad = Some(g);
        report["feasible_x"] = json!(q.x());
        report["grad_norm"] = json!(g);
        match hessian_constrained(space, &q, &t, HessianOptions::default()) {
            Ok(spectrum) => report["hessian"] = json!(spectrum),
            Err(Error::NotCritical(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(Output::ok(match format {
        Format::Json => Payload::Json(report),
        Format::Csv => {
            let mut header = numbered("x", x.len());
            header.extend(numbered("R", ric.len()));
            header.push("S".into());
            let mut row: Vec<String> = x.iter().chain(&ric).map(f64::to_string).collect();
            row.push(scalar.to_string());
            if let Some(g) = grad {
                header.push("grad_norm".into());
                row.push(g.to_string());
            }
            Payload::Text(csv_text(&header, &[row]))
        }
    }))
}

fn levels_cmd(space: &SpaceSpec, cfg: &RunConfig, format: Format) -> anyhow::Result<Output> {
    let t = candidate(space, cfg)?;
    let reports = levels(space, &t)?;
    let status = if reports.is_empty() { Status::NoResult("no subalgebra strata".into()) } else { Status::Success };
    let payload = match format {
        Format::Json => Payload::Json(json!(reports)),
        Format::Csv => {
            let header: Vec<String> =
                ["J", "alpha", "alpha_attained", "beta", "beta_attained", "derivative_at_infinity"].map(String::from).into();
            let rows: Vec<Vec<String>> = reports
                .iter()
                .map(|l| {
                    vec![
                        format!("\"{}\"", l.stratum.label()),
                        l.alpha.to_string(),
                        l.alpha_attained.to_string(),
                        l.beta.to_string(),
                        l.beta_attained.to_string(),
                        l.derivative_at_infinity.to_string(),
                    ]
                })
                .collect();
            Payload::Text(csv_text(&header, &rows))
        }
    };
    Ok(Output { payload, status, extra: Vec::new() })
}

fn flow_cmd(space: &SpaceSpec, cfg: &RunConfig, format: Format) -> anyhow::Result<Output> {
    let t = candidate(space, cfg)?;
    let x = match &cfg.x {
        Some(x) => x.clone(),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed());
            (0..space.r()).map(|_| rng.random_range(-1.0f64..1.0).exp()).collect()
        }
    };
    if x.len() != space.r() {
        bail!(Error::Length { expected: space.r(), got: x.len() });
    }
    let start = feasible(space, x, &t)?;
    let defaults = FlowParams::default();
    let params = FlowParams {
        rtol: cfg.rtol.unwrap_or(defaults.rtol),
        max_steps: cfg.max_steps.unwrap_or(defaults.max_steps),
        ..defaults
    };
    let every = match format {
        Format::Json => 0,
        Format::Csv => cfg.record_every.unwrap_or(100).max(1),
    };
    let (result, rows) = flow_traced(space, &t, &start, &params, every)?;
    let status = match &result {
        FlowResult::Converged { .. } => Status::Success,
        FlowResult::Diverged { divergence, .. } if divergence.anomaly => {
            Status::Anomaly(format!("tail limits onto the Infinity stratum {}", divergence.stratum))
        }
        FlowResult::Diverged { .. } => Status::Success,
        FlowResult::Stalled { reason, .. } => Status::NoResult(format!("flow stalled: {reason}")),
    };
    let payload = match format {
        Format::Json => Payload::Json(json!(result)),
        Format::Csv => {
            let mut buf = Vec::new();
            write_trajectory_csv(&rows, &mut buf)?;
            Payload::Text(buf)
        }
    };
    Ok(Output { payload, status, extra: Vec::new() })
}

fn saddle(space: &SpaceSpec, cfg: &RunConfig, format: Format) -> anyhow::Result<Output> {
    let t = candidate(space, cfg)?;
    let defaults = RelaxParams::default();
    let params = RelaxParams {
        nodes: cfg.nodes.unwrap_or(defaults.nodes),
        max_rounds: cfg.max_rounds.unwrap_or(defaults.max_rounds),
        ..defaults
    };
    let built = if space.is_generalized_wallach() {
        build_path_wallach(space, &t, params.nodes)
    } else {
        build_path_flag(space, &t, None, params.nodes)
    };
    let path = match built {
        Ok(path) => path,
        Err(Error::Hypothesis(why)) => {
            let report = json!({ "saddle": null, "reason": why });
            let payload = match format {
                Format::Json => Payload::Json(report),
                Format::Csv => Payload::Text(csv_text(&["round,inf_S,argmin_node,c_estimate".into()], &[])),
            };
            return Ok(Output { payload, status: Status::NoResult(format!("path hypotheses fail: {why}")), extra: Vec::new() });
        }
        Err(e) => return Err(e.into()),
    };
    let path = relax(space, &t, path, &params)?;
    let found = extract_saddle(space, &t, &path, params.degeneracy_rel);
    let status = match &found {
        Some(_) => Status::Success,
        None => Status::NoResult(format!("no critical point of co-index at most one near c = {}", path.c_estimate)),
    };
    let payload = match format {
        Format::Json => Payload::Json(json!({
            "saddle": found,
            "c_estimate": path.c_estimate,
            "bracket": [path.bracket.0, path.bracket.1],
            "from": path.from,
            "to": path.to,
            "rounds": path.rounds,
            "flagged_nodes": path.flagged,
        })),
        Format::Csv => {
            let mut buf = Vec::new();
            write_telemetry_csv(&path.telemetry, &mut buf)?;
            Payload::Text(buf)
        }
    };
    Ok(Output { payload, status, extra: Vec::new() })
}

fn classify(space: &SpaceSpec, cfg: &RunConfig, format: Format) -> anyhow::Result<Output> {
    let t = candidate(space, cfg)?;
    let label = region_label(space, &t)?;
    let critical = critical_inventory(space, &t, cfg.starts.unwrap_or(128), 1e-7);
    let payload = match format {
        Format::Json => Payload::Json(json!({ "label": label, "critical_points": critical })),
        Format::Csv => {
            let header: Vec<String> = ["kind", "name", "lhs", "rhs", "holds"].map(String::from).into();
            let rows: Vec<Vec<String>> = label
                .predicates
                .iter()
                .map(|p| {
                    vec![label.kind.as_str().into(), p.name.clone(), p.lhs.to_string(), p.rhs.to_string(), p.holds.to_string()]
                })
                .collect();
            Payload::Text(csv_text(&header, &rows))
        }
    };
    Ok(Output::ok(payload))
}

fn sweep(space: &SpaceSpec, cfg: &RunConfig, format: Format) -> anyhow::Result<Output> {
    let r = space.r();
    let plane = match cfg.axes.as_deref() {
        Some("plane") => true,
        Some("components") => false,
        Some(other) => bail!("--axes must be plane or components, got {other:?}"),
        None => CatalogShape::of(space) == CatalogShape::WallachSu3 && cfg.slice.is_none() && cfg.free.is_none(),
    };
    let (axes, u_default, v_default) = if plane {
        (Axes::WallachPlane, (-2.4, 2.4), (-1.4, 2.7))
    } else {
        let mut fixed = vec![1.0; r];
        let mut sliced = vec![false; r];
        for entry in cfg.slice.iter().flatten() {
            let (i, v) = slice_entry(entry, r)?;
            fixed[i] = v;
            sliced[i] = true;
        }
        let (first, second) = match &cfg.free {
            Some(f) if f.len() == 2 && f.iter().all(|&i| (1..=r).contains(&i)) => (f[0] - 1, f[1] - 1),
            Some(f) => bail!("--free needs two indices in 1..={r}, got {f:?}"),
            None => {
                let open: Vec<usize> = (0..r - 1).filter(|&i| !sliced[i]).collect();
                if open.len() < 2 {
                    bail!("need two free components besides the last; pass --free");
                }
                (open[0], open[1])
            }
        };
        (Axes::Components { first, second, fixed }, (0.02, 4.0), (0.02, 4.0))
    };
    let grid = GridSpec {
        axes,
        u_range: pair("u-range", cfg.u_range.as_ref(), u_default)?,
        v_range: pair("v-range", cfg.v_range.as_ref(), v_default)?,
        resolution: grid_size(cfg.grid.as_deref().unwrap_or("100x100"))?,
    };
    let records = sweep_plane(space, &grid)?;
    let payload = match format {
        Format::Json => Payload::Json(json!({ "grid": grid, "records": records })),
        Format::Csv => {
            let mut buf = Vec::new();
            write_sweep_csv(&records, &mut buf)?;
            Payload::Text(buf)
        }
    };
    Ok(Output::ok(payload))
}

fn label_color(kind: Option<RegionKind>) -> &'static str {
    match kind {
        Some(RegionKind::GlobalMax) => "dimgray",
        Some(RegionKind::SaddleTwoStrata) | Some(RegionKind::SaddleLowestLevel) => "steelblue",
        Some(RegionKind::MaxAndSaddle) => "hotpink",
        Some(RegionKind::NoPrediction) => "lightgray",
        None => "orange",
    }
}

fn image(space: &SpaceSpec, cfg: &RunConfig, format: Format) -> anyhow::Result<Output> {
    let defaults = ImageOptions::default();
    let sampling = match cfg.sampling.as_deref() {
        None | Some("log_uniform") => Sampling::LogUniform,
        Some("uniform") => Sampling::Uniform,
        Some(other) => bail!("--sampling must be log_uniform or uniform, got {other:?}"),
    };
    let range = match sampling {
        Sampling::LogUniform => pair("range", cfg.range.as_ref(), defaults.range)?,
        Sampling::Uniform => pair("range", cfg.range.as_ref(), (0.0, defaults.range.1))?,
    };
    let opts = ImageOptions { range, seed: cfg.seed(), sampling, labels: true };
    let points = ricci_image_sample(space, cfg.n.unwrap_or(100_000), &opts)?;
    let mut extra = Vec::new();
    if let Some(svg) = &cfg.svg {
        let view = if CatalogShape::of(space) == CatalogShape::WallachSu3 {
            Viewport { x: (-2.5, 2.5), y: (-1.5, 2.8), width: 800, height: 700 }
        } else {
            Viewport { x: (0.0, 5.0), y: (0.0, 5.0), width: 800, height: 800 }
        };
        let kinds = [
            None,
            Some(RegionKind::NoPrediction),
            Some(RegionKind::GlobalMax),
            Some(RegionKind::SaddleTwoStrata),
            Some(RegionKind::SaddleLowestLevel),
            Some(RegionKind::MaxAndSaddle),
        ];
        let clouds: Vec<Vec<(f64, f64)>> = kinds
            .iter()
            .map(|k| {
                points
                    .iter()
                    .filter(|p| p.definite && p.label == *k && p.projected.len() >= 2)
                    .map(|p| (p.projected[0], p.projected[1]))
                    .collect()
            })
            .collect();
        let layers: Vec<Layer> =
            kinds.iter().zip(&clouds).map(|(k, c)| Layer { points: c, color: label_color(*k), radius: 0.8 }).collect();
        std::fs::write(svg, scatter_svg(&layers, view)).with_context(|| format!("writing {}", svg.display()))?;
        extra.push(svg.clone());
    }
    let payload = match format {
        Format::Json => Payload::Json(json!(points)),
        Format::Csv => {
            let mut buf = Vec::new();
            write_image_csv(&points, &mut buf)?;
            Payload::Text(buf)
        }
    };
    Ok(Output { payload, status: Status::Success, extra })
}

fn locus(space: &SpaceSpec, cfg: &RunConfig, format: Format) -> anyhow::Result<Output> {
    let closed_available = matches!(CatalogShape::of(space), CatalogShape::WallachSu3 | CatalogShape::G2U2);
    let spec = match cfg.mode.as_deref() {
        None if closed_available => None,
        Some("closed") => None,
        None | Some("continuation") => {
            let start = cfg.start.clone().context("continuation needs --start")?;
            let free = match &cfg.free {
                None => (0, 1),
                Some(f) if f.len() == 2 && f.iter().all(|&i| i >= 1) => (f[0] - 1, f[1] - 1),
                Some(f) => bail!("--free needs two 1-based indices, got {f:?}"),
            };
            Some(TraceSpec::Continuation {
                start,
                free,
                step: cfg.step.unwrap_or(0.02),
                max_points: cfg.max_points.unwrap_or(2000),
                bounds: pair("bounds", cfg.bounds.as_ref(), (0.01, 20.0))?,
            })
        }
        Some(other) => bail!("--mode must be closed or continuation, got {other:?}"),
    };
    let spec = spec.map_or_else(
        || -> anyhow::Result<TraceSpec> {
            Ok(TraceSpec::Closed {
                range: pair("range", cfg.range.as_ref(), (0.05, 5.0))?,
                samples: cfg.samples.unwrap_or(200),
            })
        },
        Ok,
    )?;
    let points = degenerate_locus(space, &spec)?;
    let status = if points.is_empty() { Status::NoResult("no locus points".into()) } else { Status::Success };
    let payload = match format {
        Format::Json => Payload::Json(json!({ "trace": spec, "points": points })),
        Format::Csv => {
            let mut buf = Vec::new();
            write_locus_csv(&points, &mut buf)?;
            Payload::Text(buf)
        }
    };
    Ok(Output { payload, status, extra: Vec::new() })
}
