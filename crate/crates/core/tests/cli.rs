//! The command-line front end, in process and as a binary.

use std::process::Command;

use serde_json::Value;

use stfe_hull::activation::Activation;
use stfe_hull::cli::{exit_code, run_with, THREADS_ENV};
use stfe_hull::envelope::{Hull, Mode, RawInstance, Separation};
use stfe_hull::error::Error;
use stfe_hull::gapstats::{gap_report, GapReport};
use stfe_hull::network::{make_random_net, NetworkModel};
use stfe_hull::tightener::BoundsReport;

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn cli(args: &[&str]) -> Run {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("stfe-hull").chain(args.iter().copied());
    let code = run_with(argv, &mut out, &mut err);
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn json(run: &Run) -> Value {
    assert_eq!(run.code, 0, "{}", run.err);
    serde_json::from_str(&run.out).unwrap()
}

/// Every float is printed with 17 significant digits.
fn is_num17(s: &str) -> bool {
    let (mantissa, exp) = s.split_once('e').unwrap_or((s, ""));
    let digits = mantissa.trim_start_matches('-').replace('.', "");
    digits.len() == 17 && digits.chars().all(|c| c.is_ascii_digit()) && exp.parse::<i32>().is_ok()
}

const SIG2: [&str; 6] = ["envelope", "eval", "-w", "10,5", "-b", "-10"];

#[test]
fn usage_errors_and_help() {
    assert_eq!(cli(&["--help"]).code, 0);
    assert_eq!(cli(&["--version"]).code, 0);
    assert_eq!(cli(&[]).code, 1);
    assert_eq!(cli(&["frobnicate"]).code, 1);
    let r = cli(&["envelope", "eval", "-w", "1,2", "--act", "sigmoid"]);
    assert_eq!(r.code, 1, "missing --point");
    assert!(!r.err.is_empty());
    assert_eq!(cli(&["gap-report", "-w", "1,x", "--act", "sigmoid"]).code, 1);
}

#[test]
fn bad_input_data() {
    let with = |extra: &[&str]| {
        let mut a: Vec<&str> = SIG2.to_vec();
        a.extend_from_slice(extra);
        cli(&a).code
    };
    assert_eq!(with(&["--act", "mish", "--point", "0.5,0.5"]), 2);
    assert_eq!(with(&["--act", "sigmoid", "--point", "0.5"]), 2);
    assert_eq!(with(&["--act", "sigmoid", "--point", "0.5,1.5"]), 2);
    assert_eq!(with(&["--act", "sigmoid", "--point", "0.5,0.5", "--box", "0:1,0:1,0:1"]), 2);
    assert_eq!(with(&["--act", "sigmoid", "--point", "0.5,0.5", "--box", "1:0"]), 2);
    assert_eq!(with(&["--act", "elu", "--param", "alpha=-1", "--point", "0.5,0.5"]), 2);
    assert_eq!(with(&["--act", "elu", "--param", "alpha", "--point", "0.5,0.5"]), 2);
    let r = cli(&["tighten", "--net", "/nonexistent/net.nn.json"]);
    assert_eq!(r.code, 2);
    assert!(r.err.starts_with("error:"));
}

#[test]
fn numerical_failures_map_to_three() {
    for e in [
        Error::Infeasible("x".into()),
        Error::Unbounded("x".into()),
        Error::Numerical("x".into()),
    ] {
        assert_eq!(exit_code(&e), 3);
    }
    assert_eq!(exit_code(&Error::MalformedInput("x".into())), 2);
}

#[test]
fn eval_matches_the_library() {
    let raw = RawInstance::on_unit_box(vec![10.0, 5.0], -10.0, Activation::sigmoid()).unwrap();
    let hull = Hull::new(raw).unwrap();
    for (p, x) in [("1,0", [1.0, 0.0]), ("0.1,0.8", [0.1, 0.8]), ("0,0", [0.0, 0.0])] {
        let mut a = SIG2.to_vec();
        a.extend_from_slice(&["--act", "sigmoid", "--point", p]);
        let r = cli(&a);
        let v = json(&r);
        assert_eq!(v["value"].as_f64().unwrap(), hull.conc_env(&x).unwrap());
        assert_eq!(v["f"].as_f64().unwrap(), hull.f(&x));
        assert_eq!(v["h"].as_f64().unwrap(), hull.h(&x).unwrap());
        assert_eq!(v["conv_value"].as_f64().unwrap(), hull.conv_env(&x).unwrap());
        let g: Vec<f64> = v["supergradient"].as_array().unwrap().iter().map(|e| e.as_f64().unwrap()).collect();
        assert_eq!(g, hull.conc_env_supergrad(&x).unwrap());
        for token in r.out.split([',', ' ', '[', ']', '}']) {
            if token.contains('e') && !token.contains('"') {
                assert!(is_num17(token), "{token}");
            }
        }
    }
    // at a box vertex the envelope equals the function
    let v = json(&cli(&["envelope", "eval", "-w", "10,5", "-b", "-10", "--act", "sigmoid", "--point", "1,0"]));
    assert_eq!(v["value"].as_f64().unwrap(), v["f"].as_f64().unwrap());
    assert_eq!(v["region"], "i0");
}

#[test]
fn box_and_negative_weights() {
    let v = json(&cli(&[
        "envelope", "eval", "-w", "-2,3", "-b", "0.5", "--act", "tanh", "--box", "-1:1,0:2", "--point", "0.25,1.5",
    ]));
    let bbox = vec![
        stfe_hull::activation::Interval::new(-1.0, 1.0).unwrap(),
        stfe_hull::activation::Interval::new(0.0, 2.0).unwrap(),
    ];
    let hull = Hull::new(RawInstance::new(vec![-2.0, 3.0], 0.5, Activation::tanh(), bbox).unwrap()).unwrap();
    assert_eq!(v["value"].as_f64().unwrap(), hull.conc_env(&[0.25, 1.5]).unwrap());
}

#[test]
fn separate_matches_the_library() {
    let hull = Hull::new(RawInstance::on_unit_box(vec![10.0, 5.0], -10.0, Activation::sigmoid()).unwrap()).unwrap();
    let x = [0.1, 0.8];
    let y = 0.5 * (hull.conc_env(&x).unwrap() + hull.h(&x).unwrap());
    let ys = format!("{y:e}");
    let base = ["separate", "-w", "10,5", "-b", "-10", "--act", "sigmoid", "--point", "0.1,0.8", "-y", &ys];
    let mut env = base.to_vec();
    env.extend_from_slice(&["--mode", "env"]);
    let v = json(&cli(&env));
    assert_eq!(v["result"], "cut");
    assert_eq!(v["sense"], "upper");
    let Separation::Cut(cut) = hull.separate(&x, y, Mode::Env).unwrap() else { panic!() };
    assert_eq!(v["constant"].as_f64().unwrap(), cut.constant);
    let mut hest = base.to_vec();
    hest.extend_from_slice(&["--mode", "hest"]);
    assert_eq!(json(&cli(&hest))["result"], "inside");
    let mut bad = base.to_vec();
    bad.extend_from_slice(&["--mode", "exact"]);
    assert_eq!(cli(&bad).code, 2);
    let below = json(&cli(&["separate", "-w", "10,5", "-b", "-10", "--act", "sigmoid", "--point", "0.1,0.8", "-y", "-1"]));
    assert_eq!(below["sense"], "lower");
}

#[test]
fn gap_report_matches_the_library() {
    let raw = RawInstance::on_unit_box(vec![10.0, 5.0], -10.0, Activation::sigmoid()).unwrap();
    let lib = gap_report(&raw, 100_000, 4, 1).unwrap();
    let args = ["gap-report", "-w", "10,5", "-b", "-10", "--act", "sigmoid", "--samples", "100000", "--seed", "4"];
    let r = cli(&args);
    assert_eq!(r.code, 0, "{}", r.err);
    assert_eq!(GapReport::from_json(&r.out).unwrap(), lib);
    let mut csv = args.to_vec();
    csv.extend_from_slice(&["--format", "csv", "--threads", "3"]);
    let r = cli(&csv);
    assert_eq!(GapReport::from_csv(&r.out).unwrap(), lib);
    let mut bad = args.to_vec();
    bad.extend_from_slice(&["--format", "xml"]);
    assert_eq!(cli(&bad).code, 2);
}

#[test]
fn make_net_then_tighten() {
    let dir = tempfile::tempdir().unwrap();
    let net_path = dir.path().join("net.nn.json");
    let p = net_path.to_str().unwrap();
    let r = cli(&["make-net", "--layers", "4,4,4", "--act", "elu", "--param", "alpha=1", "--seed", "3", "--input-dim", "3", "--out", p]);
    assert_eq!(r.code, 0, "{}", r.err);
    let net = NetworkModel::load_json(&net_path).unwrap();
    assert_eq!(net, make_random_net(3, &[4, 4, 4], None, Activation::elu(1.0).unwrap(), 3).unwrap());

    let env_path = dir.path().join("env.csv");
    let r = cli(&["tighten", "--net", p, "--mode", "env", "--out", env_path.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.err);
    let env = BoundsReport::read_csv(std::fs::File::open(&env_path).unwrap()).unwrap();
    let r = cli(&["tighten", "--net", p, "--mode", "hest", "--threads", "2"]);
    assert_eq!(r.code, 0, "{}", r.err);
    let hest = BoundsReport::read_csv(r.out.as_bytes()).unwrap();
    assert_eq!(env.rows.len(), 24);
    for (e, h) in env.rows.iter().zip(&hest.rows) {
        assert!(e.improvement >= h.improvement - 1e-6, "{e:?} vs {h:?}");
    }
    assert!(env.mean_improvement(3).unwrap() > 0.0);
}

#[test]
fn surface_grid() {
    let r = cli(&["surface", "-w", "10,5", "-b", "-10", "--act", "sigmoid", "--grid", "5"]);
    assert_eq!(r.code, 0, "{}", r.err);
    let lines: Vec<&str> = r.out.lines().collect();
    assert_eq!(lines[0], "x1,x2,f,h,conc,conv,region");
    assert_eq!(lines.len(), 26);
    for l in &lines[1..] {
        let cols: Vec<&str> = l.split(',').collect();
        assert_eq!(cols.len(), 7);
        let v: Vec<f64> = cols[..6].iter().map(|c| c.parse().unwrap()).collect();
        assert!(v[5] <= v[2] + 1e-12 && v[2] <= v[4] + 1e-12 && v[4] <= v[3] + 1e-12, "{l}");
        assert!(["f", "l", "i0", "i1"].contains(&cols[6]));
    }
    assert_eq!(cli(&["surface", "-w", "1,2,3", "--act", "sigmoid"]).code, 2);
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stfe-hull"))
}

#[test]
fn binary_exit_codes_and_thread_variable() {
    let args = ["gap-report", "-w", "5,8,7", "-b", "-8", "--act", "sigmoid", "--samples", "70000", "--seed", "2"];
    let one = binary().args(args).env(THREADS_ENV, "1").output().unwrap();
    let two = binary().args(args).env(THREADS_ENV, "2").output().unwrap();
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, two.stdout);
    let bad = binary().args(args).env(THREADS_ENV, "many").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains(THREADS_ENV));
    assert_eq!(binary().arg("--bogus").output().unwrap().status.code(), Some(1));
    assert_eq!(binary().arg("--help").output().unwrap().status.code(), Some(0));
}
