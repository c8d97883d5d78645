use std::path::{Path, PathBuf};

use clap::Args;
use num_complex::Complex64;

use projmetric::acceptance::run_all;
use projmetric::catalog::{
    distinguish as compare_forms, fingerprint, instantiate, killing_field, killing_residual, CatalogError,
    DEFAULT_PROBES,
};
use projmetric::flow::{integral_drift, integral_values, integrate_geodesic, random_states, CONSERVATION_TOL, DEFAULT_STEP};
use projmetric::geometry::{grad_norm_sq, laplacian};
use projmetric::liouville::{
    build_ode_system, solution_space_dimension, AbcdConnection, AnsatzCase, LiouvilleError, DEFAULT_N_CHECK,
    DEFAULT_X_RANGE,
};
use projmetric::projective::{
    is_flat, liouville_invariants, symmetry_dimension_bound, symmetry_residual, FLAT_TOL,
};
use projmetric::specfile::SpecError;
use projmetric::{
    scalar_curvature, simplify, Domain, Metric2, NormalFormId, NormalFormParams, ProjectiveConnection, QuadraticForm,
    SpecFile, State64, Verdict,
};

use crate::report::{num, nums, Report};
use crate::{CliError, Common, Outcome};

/// Default tolerance of the symmetry check.
const SYMMETRY_TOL: f64 = 1e-8;
/// Default tolerance on the reassembly residual of the mobility count.
const REASSEMBLY_TOL: f64 = 1e-6;
/// Domain used for connections given by `--abcd`.
const ABCD_DOMAIN: (f64, f64, f64, f64) = (0.5, 2.5, -1.0, 1.0);
/// Values used for catalog parameters that are not given.
const DEFAULT_PARAMS: [(&str, f64); 6] = [("a", 1.0), ("b", 3.0), ("c", 1.0), ("eps", 1.0), ("eps1", 1.0), ("eps2", 1.0)];

fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn parse_point(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [x, y] => match (x.trim().parse(), y.trim().parse()) {
            (Ok(x), Ok(y)) => Ok((x, y)),
            _ => Err(format!("`{s}` is not a point `x,y`")),
        },
        _ => Err(format!("`{s}` is not a point `x,y`")),
    }
}

/// Read and parse a spec file; the report records its hash.
fn load_spec(path: &Path, name: &str, report: &mut Report) -> Result<SpecFile, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    report.input(name, &bytes);
    let text = String::from_utf8(bytes).map_err(|_| CliError::Input(format!("{}: not UTF-8", path.display())))?;
    SpecFile::parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn spec_err(path: &Path) -> impl Fn(SpecError) -> CliError + '_ {
    move |e| CliError::Input(format!("{}: {e}", path.display()))
}

fn settings(report: &mut Report, common: &Common, tol: f64) {
    report.entry("seed", common.seed);
    report.entry("tol", num(tol));
    report.entry("samples", common.samples);
}

fn sample_points(pc: &ProjectiveConnection, n: u64) -> Result<Vec<(f64, f64)>, CliError> {
    let pts = pc.samples(n as usize);
    if pts.is_empty() {
        return Err(CliError::Input("no admissible sample points in the domain".into()));
    }
    Ok(pts)
}

fn point(p: (f64, f64)) -> String {
    format!("({}, {})", num(p.0), num(p.1))
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Metric file.
    pub spec: PathBuf,
    /// Probe point `x,y` (repeatable); defaults to the first four sample points.
    #[arg(long = "probe", value_parser = parse_point, allow_negative_numbers = true)]
    pub probes: Vec<(f64, f64)>,
}

pub fn analyze(args: &AnalyzeArgs, common: &Common) -> Result<Outcome, CliError> {
    let mut report = Report::new("analyze");
    let spec = load_spec(&args.spec, "spec", &mut report)?;
    let tol = common.tol.unwrap_or(FLAT_TOL);
    settings(&mut report, common, tol);
    let g = spec.metric().map_err(spec_err(&args.spec))?.bound();
    let pc = ProjectiveConnection::of_metric(&g);
    let pts = sample_points(&pc, common.samples)?;
    let inv = liouville_invariants(&pc);
    let flat = is_flat(&pc, &pts, tol).map_err(input_err)?;
    let r = simplify(&scalar_curvature(&g));
    let i = simplify(&grad_norm_sq(&g, &r));
    let delta_r = simplify(&laplacian(&g, &r));
    for (n, k) in pc.k.iter().enumerate() {
        report.entry(format!("K{n}"), k);
    }
    report.entry("R", &r);
    report.entry("flat", flat);
    let max_of = |e: &projmetric::Expr| -> Result<f64, CliError> {
        pts.iter().try_fold(0.0f64, |m, &p| Ok(m.max(e.eval(p, &g.env).map_err(input_err)?.abs())))
    };
    report.entry("L1.max_abs", num(max_of(&inv.l1)?));
    report.entry("L2.max_abs", num(max_of(&inv.l2)?));
    let probes: Vec<(f64, f64)> = if args.probes.is_empty() {
        pts.iter().take(4).copied().collect()
    } else {
        args.probes.clone()
    };
    for (n, &p) in probes.iter().enumerate() {
        if !g.domain.admits(p, &g.env) {
            return Err(CliError::Input(format!("probe {} lies outside the domain", point(p))));
        }
        let at = |e: &projmetric::Expr| e.eval(p, &g.env).map_err(input_err);
        report.entry(format!("probe.{n}"), point(p));
        report.entry(format!("probe.{n}.K"), nums(&pc.eval_at(p).map_err(input_err)?));
        report.entry(format!("probe.{n}.L1"), num(at(&inv.l1)?));
        report.entry(format!("probe.{n}.L2"), num(at(&inv.l2)?));
        report.entry(format!("probe.{n}.R"), num(at(&r)?));
        report.entry(format!("probe.{n}.I"), num(at(&i)?));
        report.entry(format!("probe.{n}.DeltaR"), num(at(&delta_r)?));
    }
    Ok(Outcome { report, passed: true })
}

#[derive(Args, Debug)]
pub struct SymmetryArgs {
    /// Metric or connection file.
    pub spec: PathBuf,
    /// File with `Z1`, `Z2`; defaults to the input file itself.
    #[arg(long)]
    pub field: Option<PathBuf>,
}

pub fn symmetry(args: &SymmetryArgs, common: &Common) -> Result<Outcome, CliError> {
    let mut report = Report::new("symmetry");
    let spec = load_spec(&args.spec, "spec", &mut report)?;
    let (z, field_env) = match &args.field {
        Some(path) => {
            let f = load_spec(path, "field", &mut report)?;
            (f.vector_field().map_err(spec_err(path))?, f.env.clone())
        }
        None => (spec.vector_field().map_err(spec_err(&args.spec))?, spec.env.clone()),
    };
    let tol = common.tol.unwrap_or(SYMMETRY_TOL);
    settings(&mut report, common, tol);
    let mut pc = spec.connection().map_err(spec_err(&args.spec))?;
    pc.env = pc.env.merged(&field_env);
    let pts = sample_points(&pc, common.samples)?;
    let res = symmetry_residual(&pc, &z, &pts).map_err(input_err)?;
    report.entry("Z1", z.component(0));
    report.entry("Z2", z.component(1));
    report.entry("residual.max_abs", num(res.max_abs));
    report.entry("residual.per_equation", nums(&res.per_equation));
    if let Some(p) = res.worst_point {
        report.entry("residual.worst_point", point(p));
    }
    let passed = res.max_abs <= tol;
    report.entry("symmetry", passed);
    Ok(Outcome { report, passed })
}

#[derive(Args, Debug)]
pub struct FlatnessArgs {
    /// Metric or connection file.
    #[arg(required_unless_present = "abcd", conflicts_with = "abcd")]
    pub spec: Option<PathBuf>,
    /// Connection `y'' = A e^x + B y' + C e^-x y'^2 + D e^-2x y'^3` instead of a file.
    #[arg(long, num_args = 4, value_names = ["A", "B", "C", "D"], allow_negative_numbers = true)]
    pub abcd: Option<Vec<f64>>,
}

pub fn flatness(args: &FlatnessArgs, common: &Common) -> Result<Outcome, CliError> {
    let mut report = Report::new("flatness");
    let tol = common.tol.unwrap_or(FLAT_TOL);
    let pc = match (&args.spec, &args.abcd) {
        (Some(path), _) => {
            let spec = load_spec(path, "spec", &mut report)?;
            settings(&mut report, common, tol);
            spec.connection().map_err(spec_err(path))?
        }
        (None, Some(v)) => {
            report.input("abcd", nums(v).as_bytes());
            settings(&mut report, common, tol);
            let c = AbcdConnection::new(v[0], v[1], v[2], v[3]);
            let (f1, f2) = c.flatness_conditions();
            report.entry("abcd", nums(v));
            report.entry("condition.6D(B-2)-2C^2", num(f1));
            report.entry("condition.C+9AD-BC", num(f2));
            let (x0, x1, y0, y1) = ABCD_DOMAIN;
            c.connection(Domain::rect(x0, x1, y0, y1))
        }
        (None, None) => return Err(CliError::Input("a spec file or --abcd is required".into())),
    };
    let pts = sample_points(&pc, common.samples)?;
    let inv = liouville_invariants(&pc);
    let max_of = |e: &projmetric::Expr| -> Result<f64, CliError> {
        pts.iter().try_fold(0.0f64, |m, &p| Ok(m.max(e.eval(p, &pc.env).map_err(input_err)?.abs())))
    };
    report.entry("L1", &inv.l1);
    report.entry("L2", &inv.l2);
    report.entry("L1.max_abs", num(max_of(&inv.l1)?));
    report.entry("L2.max_abs", num(max_of(&inv.l2)?));
    report.entry("flat", is_flat(&pc, &pts, tol).map_err(input_err)?);
    let bound = symmetry_dimension_bound(&pc, &pts).map_err(input_err)?;
    report.entry("symmetry_dimension", bound);
    Ok(Outcome { report, passed: true })
}

#[derive(Args, Debug)]
pub struct MobilityArgs {
    /// Constants of `y'' = A e^x + B y' + C e^-x y'^2 + D e^-2x y'^3`.
    #[arg(long, num_args = 4, required = true, value_names = ["A", "B", "C", "D"], allow_negative_numbers = true)]
    pub abcd: Vec<f64>,
    /// Root pattern: 1 distinct, 2 one repeated, 3 triple.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub case: u8,
    /// Characteristic root, real or complex such as `1+2i` (repeatable).
    #[arg(long = "alpha", allow_negative_numbers = true)]
    pub alphas: Vec<String>,
    #[arg(long, num_args = 2, value_names = ["X0", "X1"], allow_negative_numbers = true)]
    pub x_range: Option<Vec<f64>>,
    /// Number of points where the constraints are imposed.
    #[arg(long, default_value_t = DEFAULT_N_CHECK)]
    pub n_check: usize,
}

fn alphas_for(case: AnsatzCase, given: &[String]) -> Result<[Complex64; 3], CliError> {
    let parsed: Vec<Complex64> = given
        .iter()
        .map(|s| s.parse::<Complex64>().map_err(|_| CliError::Input(format!("`{s}` is not a number"))))
        .collect::<Result<_, _>>()?;
    let zero = Complex64::new(0.0, 0.0);
    Ok(match (case, parsed.as_slice()) {
        (AnsatzCase::TripleRoot, []) => [zero; 3],
        (AnsatzCase::TripleRoot, [a]) => [*a; 3],
        (AnsatzCase::OneRepeated, [a, b]) => [*a, *b, *b],
        (_, [a, b, c]) => [*a, *b, *c],
        _ => {
            return Err(CliError::Input(format!(
                "case {} needs {} --alpha values, got {}",
                case.number(),
                if case == AnsatzCase::OneRepeated { "2 or 3" } else { "3" },
                parsed.len()
            )))
        }
    })
}

fn complex(z: Complex64) -> String {
    if z.im == 0.0 {
        num(z.re)
    } else {
        format!("{}{}{}i", num(z.re), if z.im < 0.0 { "-" } else { "+" }, num(z.im.abs()))
    }
}

pub fn mobility(args: &MobilityArgs, common: &Common) -> Result<Outcome, CliError> {
    let mut report = Report::new("mobility");
    let tol = common.tol.unwrap_or(REASSEMBLY_TOL);
    let case = AnsatzCase::from_number(args.case).expect("validated by clap");
    let alphas = alphas_for(case, &args.alphas)?;
    let x_range = match &args.x_range {
        Some(v) => (v[0], v[1]),
        None => DEFAULT_X_RANGE,
    };
    let config = format!(
        "abcd={} case={} alphas={:?} x_range={:?} n_check={}",
        nums(&args.abcd),
        args.case,
        alphas,
        x_range,
        args.n_check
    );
    report.input("arguments", config.as_bytes());
    settings(&mut report, common, tol);
    let v = &args.abcd;
    let abcd = AbcdConnection::new(v[0], v[1], v[2], v[3]);
    report.entry("abcd", nums(v));
    report.entry("case", args.case);
    report.entry("alphas", format!("[{}]", alphas.map(complex).join(", ")));
    report.entry("x_range", nums(&[x_range.0, x_range.1]));
    let rep = build_ode_system(abcd, case, alphas)
        .and_then(|sys| solution_space_dimension(&sys, x_range, args.n_check))
        .map_err(|e| match e {
            LiouvilleError::IndeterminateRank { .. } => CliError::Indeterminate(e.to_string()),
            other => CliError::Input(other.to_string()),
        })?;
    report.entry("dimension", rep.dimension);
    report.entry("singular_values", nums(&rep.singular_values));
    report.entry("gap", num(rep.gap));
    report.entry("reassembly_residual", num(rep.reassembly_residual));
    for (n, b) in rep.basis.iter().enumerate() {
        let parts: Vec<String> = b.iter().map(|z| complex(*z)).collect();
        report.entry(format!("basis.{n}"), format!("[{}]", parts.join(", ")));
    }
    let passed = rep.reassembly_residual <= tol;
    Ok(Outcome { report, passed })
}

/// `ID` or `ID:name=value,...`, with unspecified parameters taken from [`DEFAULT_PARAMS`].
fn parse_form(s: &str) -> Result<NormalFormParams, CliError> {
    let (id, rest) = s.split_once(':').unwrap_or((s, ""));
    let id: NormalFormId = id.parse().map_err(input_err)?;
    let mut pairs: Vec<(String, f64)> = Vec::new();
    for item in rest.split(',').filter(|t| !t.trim().is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("`{item}` is not `name=value`")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("`{v}` is not a number")))?;
        pairs.push((k.trim().to_string(), v));
    }
    for name in id.parameter_names() {
        if !pairs.iter().any(|(k, _)| k == name) {
            let v = DEFAULT_PARAMS.iter().find(|(k, _)| k == name).map(|(_, v)| *v).unwrap_or(1.0);
            pairs.push((name.to_string(), v));
        }
    }
    NormalFormParams::from_pairs(id, &pairs).map_err(input_err)
}

fn catalog_err(e: CatalogError) -> CliError {
    match e {
        CatalogError::Indeterminate(_) => CliError::Indeterminate(e.to_string()),
        other => CliError::Input(other.to_string()),
    }
}

#[derive(Args, Debug)]
pub struct CatalogArgs {
    /// Normal form `ID[:name=value,...]`, e.g. `1a:b=3,eps1=-1`.
    #[arg(required_unless_present = "list")]
    pub form: Option<String>,
    /// List the normal forms and their parameters.
    #[arg(long, conflicts_with = "form")]
    pub list: bool,
    /// Abscissa of a curvature probe on `y = 0` (repeatable).
    #[arg(long = "probe", allow_negative_numbers = true)]
    pub probes: Vec<f64>,
}

pub fn catalog(args: &CatalogArgs, common: &Common) -> Result<Outcome, CliError> {
    let mut report = Report::new("catalog");
    let tol = common.tol.unwrap_or(SYMMETRY_TOL);
    let Some(form) = &args.form else {
        settings(&mut report, common, tol);
        for id in NormalFormId::ALL {
            let (e, g) = id.components();
            report.entry(format!("form.{id}.parameters"), id.parameter_names().join(", "));
            report.entry(format!("form.{id}.projective_dimension"), id.projective_dimension());
            report.entry(format!("form.{id}.metric"), format!("({e}) dx^2 + ({g}) dy^2"));
        }
        return Ok(Outcome { report, passed: true });
    };
    let p = parse_form(form)?;
    report.input("form", p.to_string().as_bytes());
    settings(&mut report, common, tol);
    let g = instantiate(&p).map_err(catalog_err)?;
    let b = g.bound();
    report.entry("form", &p);
    report.entry("E", b.component(0, 0));
    report.entry("G", b.component(1, 1));
    report.entry("domain.x", nums(&[g.domain.x.0, g.domain.x.1]));
    report.entry("domain.y", nums(&[g.domain.y.0, g.domain.y.1]));
    report.entry("projective_dimension", p.id().projective_dimension());
    let k = killing_field(p.id());
    let kr = killing_residual(&b, &k, &b.samples(common.samples as usize)).map_err(input_err)?;
    report.entry("killing_field", format!("({}, {})", k.component(0), k.component(1)));
    report.entry("killing_residual", num(kr));
    let probes: Vec<f64> = if args.probes.is_empty() {
        DEFAULT_PROBES.to_vec()
    } else {
        args.probes.clone()
    };
    let fp = fingerprint(&p, &probes).map_err(catalog_err)?;
    report.entry("R", &fp.r);
    for (n, (x, v)) in fp.probes.iter().enumerate() {
        report.entry(format!("probe.{n}.x"), num(*x));
        report.entry(format!("probe.{n}.R"), num(v[0]));
        report.entry(format!("probe.{n}.I"), num(v[1]));
        report.entry(format!("probe.{n}.DeltaR"), num(v[2]));
    }
    if let Some((r0, d0)) = fp.origin {
        report.entry("origin.R", num(r0));
        report.entry("origin.DeltaR", num(d0));
    }
    let passed = kr <= tol;
    Ok(Outcome { report, passed })
}

#[derive(Args, Debug)]
pub struct DistinguishArgs {
    /// First normal form `ID[:name=value,...]`.
    pub a: String,
    /// Second normal form.
    pub b: String,
}

pub fn distinguish(args: &DistinguishArgs, common: &Common) -> Result<Outcome, CliError> {
    let mut report = Report::new("distinguish");
    let a = parse_form(&args.a)?;
    let b = parse_form(&args.b)?;
    report.input("forms", format!("{a} | {b}").as_bytes());
    settings(&mut report, common, projmetric::catalog::MATCH_TOL);
    report.entry("a", &a);
    report.entry("b", &b);
    let verdict = compare_forms(&a, &b).map_err(catalog_err)?;
    let kind = match &verdict {
        Verdict::Identical => "identical",
        Verdict::Distinct { .. } => "distinct",
        Verdict::SameFamily => "same-family",
    };
    report.entry("verdict", &verdict);
    report.entry("kind", kind);
    if let Verdict::Distinct { witness } = &verdict {
        report.entry("witness", witness);
    }
    Ok(Outcome { report, passed: true })
}

#[derive(Args, Debug)]
pub struct GeodesicArgs {
    /// Metric file; its `integral` lines are checked along the geodesics.
    pub spec: PathBuf,
    /// Initial state; without it, seeded random states are used.
    #[arg(long, num_args = 4, value_names = ["X", "Y", "VX", "VY"], allow_negative_numbers = true)]
    pub state: Option<Vec<f64>>,
    /// Integration time.
    #[arg(long = "time", default_value_t = 3.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub step: f64,
    /// Number of random geodesics.
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    /// Euclidean speed of random initial velocities.
    #[arg(long, default_value_t = 0.3)]
    pub speed: f64,
    /// Write the trajectory of `--state` as a table to this file.
    #[arg(long, requires = "state")]
    pub trajectory: Option<PathBuf>,
    /// Keep every n-th step in the trajectory table.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub every: u64,
}

pub fn geodesic(args: &GeodesicArgs, common: &Common) -> Result<Outcome, CliError> {
    let mut report = Report::new("geodesic");
    let spec = load_spec(&args.spec, "spec", &mut report)?;
    let tol = common.tol.unwrap_or(CONSERVATION_TOL);
    settings(&mut report, common, tol);
    let g: Metric2 = spec.metric().map_err(spec_err(&args.spec))?.bound();
    let mut integrals: Vec<(String, QuadraticForm)> = vec![("g".into(), QuadraticForm::of_metric(&g))];
    integrals.extend(spec.integrals().items.iter().map(|(l, f)| (l.clone(), f.bind(&spec.env))));
    let states: Vec<State64> = match &args.state {
        Some(v) => vec![State64::new(v[0], v[1], v[2], v[3]).map_err(input_err)?],
        None => random_states(&g, args.trials, common.seed, args.speed),
    };
    if states.is_empty() {
        return Err(CliError::Input("no admissible initial states in the domain".into()));
    }
    report.entry("time", num(args.t_end));
    report.entry("step", num(args.step));
    let labels: Vec<&str> = integrals.iter().map(|(l, _)| l.as_str()).collect();
    report.entry("integrals", labels.join(", "));
    report.comment(format!("drift table: x y vx vy | duration | {}", labels.join(" ")));
    let mut max = vec![0.0f64; integrals.len()];
    for (n, s0) in states.iter().enumerate() {
        let tr = integrate_geodesic(&g, *s0, args.t_end, args.step).map_err(input_err)?;
        let mut drifts = Vec::with_capacity(integrals.len());
        for (m, (_, f)) in integrals.iter().enumerate() {
            let d = integral_drift(&tr, f).map_err(input_err)?;
            max[m] = max[m].max(d);
            drifts.push(num(d));
        }
        report.entry(
            format!("geodesic.{n}"),
            format!(
                "{} {} {} {} | {}{} | {}",
                num(s0.x),
                num(s0.y),
                num(s0.vx),
                num(s0.vy),
                num(tr.duration()),
                if tr.truncated { " (left domain)" } else { "" },
                drifts.join(" ")
            ),
        );
        if let (Some(path), 0) = (&args.trajectory, n) {
            write_trajectory(path, &tr, &integrals, args.every as usize)?;
        }
    }
    for ((label, _), d) in integrals.iter().zip(&max) {
        report.entry(format!("drift.{label}"), num(*d));
    }
    let passed = max.iter().all(|d| *d <= tol);
    report.entry("conserved", passed);
    Ok(Outcome { report, passed })
}

fn write_trajectory(
    path: &Path,
    tr: &projmetric::Trajectory64,
    integrals: &[(String, QuadraticForm)],
    every: usize,
) -> Result<(), CliError> {
    let labels: Vec<&str> = integrals.iter().map(|(l, _)| l.as_str()).collect();
    let mut out = format!("# t x y vx vy {}\n", labels.join(" "));
    let values: Vec<Vec<f64>> = integrals
        .iter()
        .map(|(_, f)| integral_values(tr, f))
        .collect::<Result<_, _>>()
        .map_err(input_err)?;
    let last = tr.states.len() - 1;
    for (i, (t, s)) in tr.times.iter().zip(&tr.states).enumerate() {
        if i % every != 0 && i != last {
            continue;
        }
        let mut row = vec![*t, s.x, s.y, s.vx, s.vy];
        row.extend(values.iter().map(|v| v[i]));
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

pub fn verify(common: &Common) -> Result<Outcome, CliError> {
    let mut report = Report::new("verify");
    report.entry("seed", common.seed);
    let results = run_all(common.seed);
    let passed = results.iter().filter(|r| r.passed).count();
    for r in &results {
        let n = r.number;
        report.entry(format!("criterion.{n}.title"), r.title);
        report.entry(format!("criterion.{n}.status"), if r.passed { "PASS" } else { "FAIL" });
        report.entry(format!("criterion.{n}.detail"), &r.detail);
    }
    report.entry("passed", format!("{passed}/{}", results.len()));
    Ok(Outcome {
        report,
        passed: passed == results.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indeterminate_results_map_to_their_own_error() {
        let e = catalog_err(CatalogError::Indeterminate("close call".into()));
        assert!(matches!(e, CliError::Indeterminate(_)));
        assert!(matches!(catalog_err(CatalogError::ProbeOutsideDomain(3.0)), CliError::Input(_)));
    }

    #[test]
    fn forms_take_defaults() {
        let p = parse_form("2c:c=-1").unwrap();
        assert_eq!(p.to_string(), "2c(a=1, c=-1, eps1=1, eps2=1)");
        assert!(parse_form("2c:k=1").is_err());
        assert!(parse_form("2c:c").is_err());
    }

    #[test]
    fn alphas_follow_the_case() {
        let a = alphas_for(AnsatzCase::OneRepeated, &["1".into(), "2".into()]).unwrap();
        assert_eq!(a[2], Complex64::new(2.0, 0.0));
        let a = alphas_for(AnsatzCase::Distinct, &["0".into(), "1+2i".into(), "1-2i".into()]).unwrap();
        assert_eq!(a[1], Complex64::new(1.0, 2.0));
        assert!(alphas_for(AnsatzCase::Distinct, &["0".into()]).is_err());
    }
}
