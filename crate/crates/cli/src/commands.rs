//! One handler per subcommand.

use martin_gasket::boundary::{
    harmonic_at_boundary, harmonic_h, martin_metric, BoundaryError, MetricParams,
};
use martin_gasket::graph::build_graph;
use martin_gasket::interval::Interval;
use martin_gasket::kernel::estimate_hitting;
use martin_gasket::potential::{Potential, PotentialError};
use martin_gasket::recursion::{
    envelope_ratio, lemma_suite, literal_ratio_bound_failures, sequence, to_csv, verify_limits,
    HittingState, RecursionError,
};
use martin_gasket::scalar::{render, Field};
use martin_gasket::words::LETTERS;
use martin_gasket::{AnyWord, ChainParams, FiniteWord, Mode, Rational};
use serde_json::{json, Value};

use crate::report::{emit, CliError, Report, RunConfig};
use crate::svg::{self, MAX_SVG_DEPTH};
use crate::{Cli, Command};

/// Evaluate `$body` over rationals in exact mode and over floats otherwise,
/// yielding the rendered value and its float approximation.
macro_rules! by_mode {
    ($params:expr, |$pot:ident| $body:expr) => {{
        match $params.mode() {
            Mode::Exact => {
                let $pot = Potential::<Rational>::new($params).map_err(potential_error)?;
                let v = $body.map_err(potential_error)?;
                (render(&v), Field::to_f64(&v))
            }
            Mode::Float => {
                let $pot = Potential::<f64>::new($params).map_err(potential_error)?;
                let v = $body.map_err(potential_error)?;
                (render(&v), v)
            }
        }
    }};
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let params = cli.params()?;
    let text = match &cli.command {
        Command::Sequences { n } => sequences(cli, &params, *n)?,
        Command::Verify {
            tol,
            n_max,
            lemma_levels,
            float,
        } => return verify(cli, &params, *tol, *n_max, *lemma_levels, *float),
        Command::Simulate {
            start,
            level,
            paths,
            kernel,
        } => {
            let start_w: FiniteWord = start.parse().map_err(CliError::usage)?;
            let est = estimate_hitting(
                &params,
                (*kernel).into(),
                &start_w,
                *level,
                *paths,
                cli.seed,
            )
            .map_err(CliError::usage)?;
            let rows = LETTERS
                .iter()
                .map(|&i| {
                    let k = i as usize - 1;
                    vec![
                        i.to_string(),
                        est.estimates[k].to_string(),
                        est.stderr[k].to_string(),
                    ]
                })
                .collect();
            let args = json!({ "start": start, "level": level, "paths": paths,
                               "kernel": format!("{kernel:?}").to_lowercase() });
            report(
                cli,
                &params,
                "simulate",
                args,
                json!(est),
                vec!["corner", "estimate", "stderr"],
                rows,
            )
        }
        Command::Hitting { x, y } => {
            let (x, y) = (finite(x)?, finite(y)?);
            let args = json!({ "x": x.to_string(), "y": y.to_string() });
            let (value, approx) = by_mode!(&params, |pot| pot.hitting_probability(&x, &y));
            value_report(cli, &params, "hitting", args, value, approx)
        }
        Command::Green { x, y } => {
            let (x, y) = (finite(x)?, finite(y)?);
            let args = json!({ "x": x.to_string(), "y": y.to_string() });
            let (value, approx) = by_mode!(&params, |pot| pot.green(&x, &y).map(|g| g.value));
            value_report(cli, &params, "green", args, value, approx)
        }
        Command::Kernel { z, target, tol } => kernel(cli, &params, z, target, *tol)?,
        Command::Metric {
            x,
            y,
            r,
            depth,
            kernel_tol,
        } => {
            let mp = MetricParams::new(*r, *depth, *kernel_tol).map_err(CliError::usage)?;
            let (xw, yw) = (any(x)?, any(y)?);
            let pot = float_potential(&params)?;
            let rep = martin_metric(&pot, mp, &xw, &yw).map_err(boundary_error)?;
            let args = json!({ "x": xw.to_string(), "y": yw.to_string() });
            let body = json!({ "value": rep.value, "error_bound": rep.error_bound,
                               "params": rep.params,
                               "separated": rep.value > rep.error_bound });
            let rows = vec![vec![rep.value.to_string(), rep.error_bound.to_string()]];
            report(
                cli,
                &params,
                "metric",
                args,
                body,
                vec!["value", "error_bound"],
                rows,
            )
        }
        Command::Harmonic { x, i, tol } => harmonic(cli, &params, x, *i, *tol)?,
        Command::Gasket {
            depth,
            color_by,
            tol,
        } => {
            if *depth > MAX_SVG_DEPTH {
                return Err(CliError::usage(format!(
                    "depth {depth} exceeds the cap {MAX_SVG_DEPTH}"
                )));
            }
            let pot = float_potential(&params)?;
            svg::render(&pot, *color_by, *depth, *tol).map_err(boundary_error)?
        }
        Command::GraphExport { level } => build_graph(*level).map_err(CliError::usage)?.to_dot(),
    };
    emit(&text, cli.out.as_deref())
}

fn config(cli: &Cli, params: &ChainParams, command: &'static str, args: Value) -> RunConfig {
    RunConfig {
        command,
        p: cli.p.clone(),
        mode: params.mode(),
        seed: cli.seed,
        format: cli.format,
        args,
    }
}

fn report(
    cli: &Cli,
    params: &ChainParams,
    command: &'static str,
    args: Value,
    body: Value,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
) -> String {
    Report {
        config: config(cli, params, command, args),
        body,
        header,
        rows,
    }
    .render()
}

fn value_report(
    cli: &Cli,
    params: &ChainParams,
    command: &'static str,
    args: Value,
    value: String,
    approx: f64,
) -> String {
    let rows = vec![vec![value.clone(), approx.to_string()]];
    report(
        cli,
        params,
        command,
        args,
        json!({ "value": value, "approx": approx }),
        vec!["value", "approx"],
        rows,
    )
}

fn finite(s: &str) -> Result<FiniteWord, CliError> {
    s.parse().map_err(CliError::usage)
}

fn any(s: &str) -> Result<AnyWord, CliError> {
    s.parse().map_err(CliError::usage)
}

fn boundary_error(e: BoundaryError) -> CliError {
    match e {
        BoundaryError::BadTolerance | BoundaryError::Letter(_) | BoundaryError::Word(_) => {
            CliError::usage(e)
        }
        BoundaryError::MetricParams(_) | BoundaryError::NegativeWeight => CliError::usage(e),
        _ => CliError::failure(e),
    }
}

fn float_potential(params: &ChainParams) -> Result<Potential<f64>, CliError> {
    Potential::new(&params.to_float()).map_err(CliError::failure)
}

fn potential_error(e: PotentialError) -> CliError {
    match e {
        PotentialError::Level(_) | PotentialError::BadTolerance | PotentialError::Param(_) => {
            CliError::usage(e)
        }
        _ => CliError::failure(e),
    }
}

fn state_json<S: Field>(st: &HittingState<S>) -> Value {
    json!({
        "n": st.n,
        "alpha": render(&st.alpha), "beta": render(&st.beta), "gamma": render(&st.gamma),
        "a": render(&st.a), "b": render(&st.b), "c": render(&st.c),
    })
}

fn sequences(cli: &Cli, params: &ChainParams, n: usize) -> Result<String, CliError> {
    fn table<S: Field>(
        params: &ChainParams,
        n: usize,
    ) -> Result<(Vec<Value>, String), RecursionError> {
        let states = sequence::<S>(params, n)?;
        Ok((states.iter().map(state_json).collect(), to_csv(&states)))
    }
    let res = match params.mode() {
        Mode::Exact => table::<Rational>(params, n),
        Mode::Float => table::<f64>(params, n),
    };
    let (rows, csv) = res.map_err(|e| match e {
        RecursionError::LevelTooSmall | RecursionError::Param(_) => CliError::usage(e),
        _ => CliError::failure(e),
    })?;
    Ok(match cli.format {
        crate::Format::Csv => csv,
        crate::Format::Json => report(
            cli,
            params,
            "sequences",
            json!({ "n": n }),
            json!({ "states": rows }),
            vec![],
            vec![],
        ),
    })
}

fn verify(
    cli: &Cli,
    params: &ChainParams,
    tol: f64,
    n_max: usize,
    lemma_levels: usize,
    float: bool,
) -> Result<(), CliError> {
    let bad_input = |e: RecursionError| match e {
        RecursionError::ToleranceBelowResolution
        | RecursionError::BadTolerance
        | RecursionError::LevelTooSmall
        | RecursionError::Param(_) => CliError::usage(e),
        _ => CliError::failure(e),
    };
    let use_float = float || cli.mode == Some(crate::ModeArg::Float);
    let limits = if use_float {
        verify_limits::<f64>(params, tol, n_max)
    } else {
        verify_limits::<Interval>(params, tol, n_max)
    };
    let (limits_json, limits_ok, limits_row) = match limits {
        Ok(rep) => {
            let ok = rep.envelope_holds;
            let row = vec![
                "limits".to_string(),
                ok.to_string(),
                format!(
                    "converged at n={} envelope {}",
                    rep.converged_at, rep.envelope
                ),
            ];
            (json!(rep), ok, row)
        }
        Err(e @ RecursionError::NotConverged { .. }) => (
            json!({ "error": e.to_string() }),
            false,
            vec!["limits".to_string(), "false".to_string(), e.to_string()],
        ),
        Err(e) => return Err(bad_input(e)),
    };
    let states = sequence::<Interval>(params, lemma_levels).map_err(bad_input)?;
    let lemmas = lemma_suite(params, &states).map_err(bad_input)?;
    let literal = literal_ratio_bound_failures(params, &states).map_err(bad_input)?;
    let passed = limits_ok && lemmas.all_hold();
    let (en, ed) = envelope_ratio(params);
    let mut rows = vec![limits_row];
    rows.extend(lemmas.checks.iter().map(|c| {
        vec![
            c.name.replace(',', ";"),
            c.holds.to_string(),
            c.first_failure
                .map_or(String::new(), |n| format!("first failure n={n}")),
        ]
    }));
    let body = json!({
        "passed": passed,
        "limit_arithmetic": if use_float { "binary64" } else { "interval" },
        "lemma_arithmetic": "interval",
        "envelope": format!("({en}/{ed})^(n-2)"),
        "limits": limits_json,
        "lemmas": lemmas,
        "literal_ratio_bound_failures": literal,
    });
    let args =
        json!({ "tol": tol, "n_max": n_max, "lemma_levels": lemma_levels, "float": use_float });
    let text = report(
        cli,
        params,
        "verify",
        args,
        body,
        vec!["check", "holds", "note"],
        rows,
    );
    emit(&text, cli.out.as_deref())?;
    if passed {
        Ok(())
    } else {
        Err(CliError::failure("verification failed"))
    }
}

fn kernel(
    cli: &Cli,
    params: &ChainParams,
    z: &str,
    target: &str,
    tol: f64,
) -> Result<String, CliError> {
    let z = finite(z)?;
    let target = any(target)?;
    let args = json!({ "z": z.to_string(), "target": target.to_string(), "tol": tol });
    let (value, approx, bound, level) = match &target {
        AnyWord::Finite(y) => {
            let (value, approx) = by_mode!(params, |pot| pot.martin_kernel(&z, y));
            let (_, bound) = by_mode!(params, |pot| pot.kernel_bound(&z));
            (value, approx, bound, None)
        }
        AnyWord::Boundary(x) => {
            let pot = float_potential(params)?;
            let k = pot
                .kernel_at_boundary(&z, x, tol)
                .map_err(potential_error)?;
            let bound = pot.kernel_bound(&z).map_err(potential_error)?;
            (render(&k.value), k.value, bound, Some(k.level))
        }
    };
    let within = approx <= bound * (1.0 + 1e-12);
    if !within {
        return Err(CliError::failure(format!(
            "K({z}, {target}) = {approx} exceeds the bound {bound}"
        )));
    }
    let rows = vec![vec![value.clone(), approx.to_string(), bound.to_string()]];
    Ok(report(
        cli,
        params,
        "kernel",
        args,
        json!({ "value": value, "approx": approx, "bound": bound,
                "within_bound": within, "level": level }),
        vec!["value", "approx", "bound"],
        rows,
    ))
}

fn harmonic(
    cli: &Cli,
    params: &ChainParams,
    x: &str,
    i: Option<u8>,
    tol: f64,
) -> Result<String, CliError> {
    let x = any(x)?;
    let letters: Vec<u8> = match i {
        Some(i) => vec![i],
        None => LETTERS.to_vec(),
    };
    let pot = float_potential(params)?;
    let mut values = serde_json::Map::new();
    let mut rows = Vec::new();
    for &l in &letters {
        let v = match &x {
            AnyWord::Finite(w) => harmonic_h(&pot, l, w, tol),
            AnyWord::Boundary(w) => harmonic_at_boundary(&pot, l, w, tol),
        }
        .map_err(boundary_error)?;
        values.insert(l.to_string(), json!(v));
        rows.push(vec![l.to_string(), v.to_string()]);
    }
    Ok(report(
        cli,
        params,
        "harmonic",
        json!({ "x": x.to_string(), "i": i, "tol": tol }),
        json!({ "h": values }),
        vec!["i", "value"],
        rows,
    ))
}
