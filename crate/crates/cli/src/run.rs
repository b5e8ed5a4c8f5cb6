use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use freelens::bounds::{self, format_sig, BoundReport};
use freelens::chaos::{self, ChaosTensor};
use freelens::combinatorics::{free_trace_moment, gaussian_trace_moment};
use freelens::model::Builtin;
use freelens::rng::derive_seed;
use freelens::{kikuchi, lehner, linalg, model_io, par, params, sampling, spiked, CoefficientModel};

use crate::config::*;
use crate::CliError;

enum Value {
    Num(f64),
    Raw(String),
}

/// Lines of `name=value` in text mode, or a header and one row in CSV mode.
struct Record {
    fields: Vec<(&'static str, Value)>,
}

impl Record {
    fn new() -> Self {
        Record { fields: Vec::new() }
    }

    fn num(mut self, name: &'static str, x: f64) -> Self {
        self.fields.push((name, Value::Num(x)));
        self
    }

    fn raw(mut self, name: &'static str, value: impl ToString) -> Self {
        self.fields.push((name, Value::Raw(value.to_string())));
        self
    }

    fn render(&self, format: Format) -> String {
        let show = |v: &Value| match (v, format) {
            (Value::Num(x), Format::Text) => format_sig(*x),
            (Value::Num(x), Format::Csv) => format!("{x}"),
            (Value::Raw(s), _) => s.clone(),
        };
        match format {
            Format::Text => self.fields.iter().map(|(k, v)| format!("{k}={}\n", show(v))).collect(),
            Format::Csv => {
                let head: Vec<&str> = self.fields.iter().map(|f| f.0).collect();
                let row: Vec<String> = self.fields.iter().map(|f| show(&f.1)).collect();
                format!("{}\n{}\n", head.join(","), row.join(","))
            }
        }
    }
}

fn csv_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v}")).unwrap_or_default()
}

fn bounds_csv(reports: &[BoundReport]) -> String {
    let mut out = String::from("name,lower,upper,failure_probability,constant_assumed,log_base\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.name,
            csv_opt(r.lower),
            csv_opt(r.upper),
            csv_opt(r.failure_probability),
            r.constant_assumed,
            r.log_base
        );
    }
    out
}

fn bounds_text(reports: &[BoundReport]) -> String {
    reports.iter().map(|r| r.to_string()).collect::<Vec<_>>().join("\n")
}

fn load_model(path: &Path) -> Result<CoefficientModel, CliError> {
    Ok(model_io::read_model(path)?)
}

/// Dimension entering the logarithms: `d` for self-adjoint models, `d1 + d2`
/// for the dilation of rectangular ones.
fn log_dim(m: &CoefficientModel) -> usize {
    if m.is_self_adjoint() {
        m.d1()
    } else {
        m.d1() + m.d2()
    }
}

fn params_cmd(a: &ParamsArgs, format: Format) -> Result<String, CliError> {
    let m = load_model(&a.model)?;
    let p = params::params_report(&m, a.restarts, a.iters);
    Ok(Record::new()
        .num("sigma", p.sigma)
        .num("v", p.v)
        .num("sigma_star_lower", p.sigma_star_lower)
        .num("sigma_star_upper", p.sigma_star_upper)
        .num("v_tilde", p.v_tilde)
        .render(format))
}

fn bounds_cmd(a: &BoundsArgs, format: Format) -> Result<String, CliError> {
    let m = load_model(&a.model)?;
    let p = params::params_report(&m, a.restarts, a.iters);
    let d = log_dim(&m);
    let mut reports = vec![bounds::nck_report(p.sigma, m.d1(), m.d2())?, bounds::pisier_report(&m)];
    if m.is_centered() {
        reports.push(bounds::free_norm_range(p.sigma));
    }
    if d >= 2 {
        reports.push(bounds::intrinsic_gap(&p, d, a.constant, a.t)?);
    }
    if let Some(r) = a.r {
        if d >= 2 {
            reports.push(bounds::improved_bernstein(p.sigma, p.v, r, p.sigma_star_upper, d, a.constant, a.t)?);
        }
        if let Some(t) = a.t {
            reports.push(bounds::bernstein_report(p.sigma * p.sigma, r, d, t)?);
            reports.push(bounds::universality_gap(p.sigma_star_upper, p.sigma, r, d, a.constant, t)?);
        }
    }
    Ok(match format {
        Format::Text => bounds_text(&reports),
        Format::Csv => bounds_csv(&reports),
    })
}

fn lehner_cmd(a: &LehnerArgs, format: Format) -> Result<String, CliError> {
    let mut m = load_model(&a.model)?;
    if !m.is_self_adjoint() {
        m = m.hermitian_dilation();
    }
    let s = lehner::lehner_solve(&m, a.tol, a.max_iter)?;
    let mut rec = Record::new().num("lehner_norm", s.norm).num("lambda_max_free", s.plus.value);
    let mut lower = s.plus.lower;
    let mut iterations = s.plus.iterations;
    if let Some(minus) = &s.minus {
        rec = rec.num("neg_lambda_min_free", minus.value);
        lower = lower.max(minus.lower);
        iterations += minus.iterations;
    }
    Ok(rec
        .num("certified_lower", lower)
        .num("pisier_lower", s.pisier.0)
        .num("pisier_upper", s.pisier.1)
        .num("tol", a.tol)
        .raw("iterations", iterations)
        .render(format))
}

fn moments_cmd(a: &MomentsArgs, format: Format) -> Result<String, CliError> {
    let m = load_model(&a.model)?;
    let mut rec = Record::new().raw("p", a.p);
    if matches!(a.kind, MomentKind::Gaussian | MomentKind::Both) {
        rec = rec.num("gaussian_moment", gaussian_trace_moment(&m, a.p)?);
    }
    if matches!(a.kind, MomentKind::Free | MomentKind::Both) {
        rec = rec.num("free_moment", free_trace_moment(&m, a.p)?);
    }
    if let Some(trials) = a.mc {
        let e = sampling::empirical_trace_moment(&m, a.p, trials, a.seed)?;
        rec = rec.num("mc_moment", e.mean).num("mc_stderr", e.stderr).raw("mc_trials", e.trials);
    }
    Ok(rec.render(format))
}

fn sample_cmd(a: &SampleArgs, format: Format) -> Result<String, CliError> {
    let m = load_model(&a.model)?;
    let norm = sampling::empirical_norm(&m, a.trials, a.seed)?;
    let mut rec = Record::new()
        .raw("model_digest", sampling::model_digest(&m))
        .raw("trials", a.trials)
        .raw("seed", a.seed)
        .num("mean_norm", norm.mean)
        .num("norm_stderr", norm.stderr);
    if m.is_self_adjoint() {
        let top = sampling::empirical_lambda_max(&m, a.trials, a.seed)?;
        rec = rec.num("mean_lambda_max", top.mean).num("lambda_max_stderr", top.stderr);
    }
    if let Some(path) = &a.spectrum_out {
        let spectra = par::map_range(a.trials, |t| sampling::empirical_spectrum(&m, derive_seed(a.seed, t as u64)));
        let mut csv = String::from("trial,index,eigenvalue\n");
        for (t, s) in spectra.iter().enumerate() {
            for (i, e) in s.eigenvalues.iter().enumerate() {
                let _ = writeln!(csv, "{t},{i},{e}");
            }
        }
        fs::write(path, csv)?;
    }
    Ok(rec.render(format))
}

fn sweep_cmd(a: &SweepArgs) -> Result<String, CliError> {
    let rows = spiked::spiked_sweep(a.d, &a.lambdas, a.trials, a.seed)?;
    Ok(spiked::sweep_csv(&rows))
}

fn kikuchi_cmd(a: &KikuchiArgs) -> Result<String, CliError> {
    let rows = kikuchi::detection_trials(a.n, a.r, a.l, a.lambda, a.trials, a.seed, a.threshold)?;
    Ok(kikuchi::detection_csv(&rows))
}

fn chaos_cmd(a: &ChaosArgs, format: Format) -> Result<String, CliError> {
    let t = chaos::read_tensor(&a.tensor)?;
    let mut rec = Record::new().raw("q", t.q()).raw("m", t.m()).raw("nnz", t.nnz());
    if a.sigma {
        rec = rec.num("sigma_chaos", chaos::sigma_chaos(&t));
    }
    if a.v {
        rec = rec.num("v_chaos", chaos::v_chaos(&t));
    }
    if let Some(c) = a.bound {
        let b = chaos::iterated_bound(&t, c)?;
        rec = rec.num("iterated_bound", b.upper.unwrap_or(f64::NAN)).num("constant_assumed", c);
    }
    if let Some(n) = a.sample {
        let norms = par::map_range(n, |k| {
            chaos::sample_chaos(&t, derive_seed(a.seed, k as u64), !a.coupled).map(|y| linalg::spectral_norm(&y))
        })
        .into_iter()
        .collect::<freelens::Result<Vec<f64>>>()?;
        let e = sampling::Estimate::from_samples(&norms);
        rec = rec
            .raw("sample_mode", if a.coupled { "coupled" } else { "decoupled" })
            .num("mean_norm", e.mean)
            .num("norm_stderr", e.stderr)
            .raw("trials", e.trials);
    }
    Ok(rec.render(format))
}

fn gen_cmd(a: &GenArgs) -> Result<String, CliError> {
    let model = match a.kind {
        GenKind::Wigner => CoefficientModel::builtin(&Builtin::Wigner { d: a.d })?,
        GenKind::Diagonal => CoefficientModel::builtin(&Builtin::Diagonal { d: a.d })?,
        GenKind::Band => CoefficientModel::builtin(&Builtin::Band { d: a.d, bandwidth: a.bandwidth })?,
        GenKind::Spiked => {
            let mut v = vec![0.0; a.d];
            if let Some(first) = v.first_mut() {
                *first = 1.0;
            }
            CoefficientModel::builtin(&Builtin::SpikedWigner { d: a.d, lambda: a.lambda, v })?
        }
        GenKind::Random => {
            let d2 = a.d2.unwrap_or(a.d);
            CoefficientModel::random_gaussian(a.d, d2, a.n, a.d2.is_none(), a.mean, a.seed)?
        }
        GenKind::SosChaos => {
            let t: ChaosTensor = chaos::sos_chaos_tensor(a.n, a.d)?;
            return Ok(chaos::tensor_to_json(&t) + "\n");
        }
    };
    Ok(model_io::model_to_json(&model, a.sparse) + "\n")
}

/// Executes `config`, returning the main report.
pub fn execute(config: &RunConfig) -> Result<String, CliError> {
    let f = config.format;
    match &config.command {
        Command::Params(a) => params_cmd(a, f),
        Command::Bounds(a) => bounds_cmd(a, f),
        Command::Lehner(a) => lehner_cmd(a, f),
        Command::Moments(a) => moments_cmd(a, f),
        Command::Sample(a) => sample_cmd(a, f),
        Command::SpikedSweep(a) => sweep_cmd(a),
        Command::Kikuchi(a) => kikuchi_cmd(a),
        Command::Chaos(a) => chaos_cmd(a, f),
        Command::ModelGen(a) => gen_cmd(a),
    }
}

/// Executes `config`, writes the report to `--out` or stdout, and returns the
/// exit status. Failures print one line to stderr.
pub fn run(config: &RunConfig) -> i32 {
    let written = execute(config).and_then(|report| match &config.out {
        Some(path) => fs::write(path, report).map_err(CliError::from),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(report.as_bytes()).and_then(|_| stdout.flush()).map_err(CliError::from)
        }
    });
    match written {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("freelens: {e}");
            e.exit_code()
        }
    }
}
