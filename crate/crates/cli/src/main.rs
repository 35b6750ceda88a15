//! `ricci-lab`: prescribed Ricci curvature experiments on homogeneous spaces.
//!
//! Exit codes: 0 success, 2 invalid input, 3 no result, 4 numerical anomaly.

mod commands;
mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use clap::Parser;
use serde_json::json;

use commands::{Payload, Status};
use config::{read_config, CommandKind, ConfigFile, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "ricci-lab", version, about = "Prescribed Ricci curvature on homogeneous spaces")]
struct Cli {
    /// Command to run; taken from the config file when omitted.
    #[arg(value_enum)]
    command: Option<CommandKind>,
    /// JSON config file or a manifest from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    run: RunConfig,
}

const EXIT_INVALID: i32 = 2;
const EXIT_NO_RESULT: i32 = 3;
const EXIT_ANOMALY: i32 = 4;

/// Manifest path for an output file: `out.csv` gives `out.csv.manifest.json`.
fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

fn execute(cli: Cli) -> anyhow::Result<i32> {
    let file = match &cli.config {
        Some(path) => read_config(path)?,
        None => ConfigFile::default(),
    };
    let kind = cli.command.or(file.command).context("no command given on the command line or in the config")?;
    let mut cfg = cli.run.over(file.run);
    cfg.seed = Some(cfg.seed());
    let format = *cfg.format.get_or_insert(kind.default_format());
    if let Some(n) = cfg.threads {
        // The global pool can only be set once per process; later calls keep the first size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }

    let clock = Instant::now();
    let out = commands::run(kind, &cfg, format)?;
    let wall = clock.elapsed().as_secs_f64();

    let bytes = match &out.payload {
        Payload::Json(v) => {
            let mut text = serde_json::to_string_pretty(v)?;
            text.push('\n');
            text.into_bytes()
        }
        Payload::Text(b) => b.clone(),
    };
    let code = match &out.status {
        Status::Success => 0,
        Status::NoResult(why) => {
            eprintln!("no result: {why}");
            EXIT_NO_RESULT
        }
        Status::Anomaly(why) => {
            eprintln!("anomaly: {why}");
            EXIT_ANOMALY
        }
    };
    match &cfg.output {
        Some(path) => {
            std::fs::write(path, &bytes).with_context(|| format!("writing {}", path.display()))?;
            let mut outputs = vec![path.clone()];
            outputs.extend(out.extra.iter().cloned());
            let manifest = json!({
                "command": kind,
                "run": {
                    "version": env!("CARGO_PKG_VERSION"),
                    "wall_time_s": wall,
                    "exit_code": code,
                    "outputs": outputs,
                },
            });
            let mut manifest = manifest.as_object().cloned().unwrap_or_default();
            if let serde_json::Value::Object(inputs) = serde_json::to_value(&cfg)? {
                manifest.extend(inputs);
            }
            let text = serde_json::to_string_pretty(&manifest)? + "\n";
            let target = manifest_path(path);
            std::fs::write(&target, text).with_context(|| format!("writing {}", target.display()))?;
        }
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(code)
}

/// Parses `args` (including the program name) and runs; returns the exit code.
fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { 0 };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_INVALID
        }
    }
}

fn main() {
    std::process::exit(run(std::env::args_os()));
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scratch(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("ricci-lab-cli-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    fn run_to(args: &[&str], name: &str) -> (i32, String) {
        let out = scratch(name);
        let mut full = vec!["ricci-lab"];
        full.extend_from_slice(args);
        full.extend(["--output", out.to_str().unwrap()]);
        let code = run(full);
        (code, std::fs::read_to_string(&out).unwrap_or_default())
    }

    fn json_of(text: &str) -> serde_json::Value {
        serde_json::from_str(text).unwrap()
    }

    #[test]
    fn curvature_of_kahler_metric() {
        let (code, text) = run_to(&["curvature", "--space", "wallach_su3", "--x", "1,1,2"], "kahler.json");
        assert_eq!(code, 0);
        let v = json_of(&text);
        let ric: Vec<f64> = serde_json::from_value(v["ricci"].clone()).unwrap();
        for (got, want) in ric.iter().zip([1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        let (code, text) = run_to(&["curvature", "--space", "g2_u2", "--x", "1,1,1"], "g2.json");
        assert_eq!(code, 0);
        assert!((json_of(&text)["scalar"].as_f64().unwrap() - 3.75).abs() < 1e-12);
    }

    #[test]
    fn invalid_input_exits_2() {
        assert_eq!(run(["ricci-lab", "curvature", "--space", "wallach_su3", "--x", "1,0,2"]), EXIT_INVALID);
        assert_eq!(run(["ricci-lab", "levels", "--space", "no_such_space", "--T", "1,1,1"]), EXIT_INVALID);
        assert_eq!(run(["ricci-lab", "levels", "--space", "wallach_su3", "--T", "1,-1,1"]), EXIT_INVALID);
        assert_eq!(run(["ricci-lab", "--bogus"]), EXIT_INVALID);
    }

    #[test]
    fn levels_match_closed_forms() {
        let (code, text) = run_to(&["levels", "--space", "g2_u2", "--T", "1.6,0.22,1"], "levels.json");
        assert_eq!(code, 0);
        let v = json_of(&text);
        let get = |k: usize, key: &str| v[k][key].as_f64().unwrap();
        assert!((get(0, "alpha") - 25.0 / 66.0).abs() < 1e-9);
        assert!((get(1, "alpha") - 3.0 / 8.0).abs() < 1e-9);
        assert!((get(0, "beta") - 5.0 / 13.0).abs() < 1e-9);
        assert!((get(1, "beta") - 125.0 / 342.0).abs() < 1e-9);
    }

    #[test]
    fn saddle_on_wallach() {
        let (code, text) = run_to(&["saddle", "--space", "wallach_su3", "--T", "0.15,0.15,0.7"], "saddle.json");
        assert_eq!(code, 0);
        let v = json_of(&text);
        assert_eq!(v["saddle"]["critical"]["spectrum"]["co_index"], 1);
        let c = v["saddle"]["critical"]["c"].as_f64().unwrap();
        assert!(0.476 < c && c < 2.223);
    }

    #[test]
    fn saddle_without_hypotheses_has_no_result() {
        let (code, _) = run_to(&["saddle", "--space", "wallach_su3", "--T", "1,1,1"], "nosaddle.json");
        assert_eq!(code, EXIT_NO_RESULT);
    }

    #[test]
    fn flow_csv_and_json() {
        let (code, text) = run_to(&["flow", "--space", "wallach_su3", "--T", "1,1,1", "--seed", "4"], "flow.json");
        assert_eq!(code, 0);
        assert_eq!(json_of(&text)["status"], "Converged");
        let (code, text) =
            run_to(&["flow", "--space", "wallach_su3", "--T", "1,1,1", "--format", "csv", "--record-every", "5"], "flow.csv");
        assert_eq!(code, 0);
        assert!(text.starts_with("step,t,y1,y2,y3,S,grad_norm\n"));
    }

    #[test]
    fn sweep_f4_slice() {
        let (code, text) =
            run_to(&["sweep", "--space", "f4_u3su2", "--slice", "T3=0.375", "--grid", "12x10"], "f4sweep.csv");
        assert_eq!(code, 0);
        let header = text.lines().next().unwrap();
        assert!(header.contains("c1_main_lhs") && header.contains("c3_main_lhs"));
        assert_eq!(text.lines().count(), 121);
    }

    #[test]
    fn image_is_byte_identical_and_manifest_replays() {
        let svg = scratch("image.svg");
        let args = ["image", "--space", "wallach_su3", "--n", "2000", "--seed", "3", "--svg", svg.to_str().unwrap()];
        let (code, first) = run_to(&args, "image.csv");
        assert_eq!(code, 0);
        let (_, second) = run_to(&args, "image2.csv");
        assert_eq!(first, second);
        assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));

        let out = scratch("image.csv");
        let manifest = manifest_path(&out);
        let recorded = json_of(&std::fs::read_to_string(&manifest).unwrap());
        assert_eq!(recorded["seed"], 3);
        assert_eq!(recorded["command"], "image");
        std::fs::remove_file(&out).unwrap();
        assert_eq!(run(["ricci-lab", "--config", manifest.to_str().unwrap()]), 0);
        assert_eq!(std::fs::read_to_string(&out).unwrap(), first);
    }

    #[test]
    fn config_file_below_flags() {
        let cfg = scratch("levels-config.json");
        std::fs::write(&cfg, r#"{"command":"levels","space":"wallach_su3","T":[1,1,1],"format":"csv"}"#).unwrap();
        let (code, text) = run_to(&["--config", cfg.to_str().unwrap(), "--T", "0.15,0.15,0.7"], "levels.csv");
        assert_eq!(code, 0);
        let first_alpha: f64 = text.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert!((first_alpha - 1.0 / 0.45).abs() < 1e-9);
    }

    #[test]
    fn locus_and_classify() {
        let (code, text) = run_to(&["locus", "--space", "g2_u2", "--samples", "20"], "locus.csv");
        assert_eq!(code, 0);
        assert!(text.starts_with("x1,x2,x3,p1,p2,sigma_ratio"));
        let (code, _) = run_to(&["locus", "--space", "f4_u3su2", "--mode", "closed"], "f4locus.csv");
        assert_eq!(code, EXIT_INVALID);
        let (code, text) = run_to(&["classify", "--space", "g2_u2", "--T", "1.6,0.22,1"], "classify.json");
        assert_eq!(code, 0);
        let v = json_of(&text);
        assert_eq!(v["label"]["kind"], "max_and_saddle");
        assert_eq!(v["critical_points"].as_array().unwrap().len(), 2);
    }
}
