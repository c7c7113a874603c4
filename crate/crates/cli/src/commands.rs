//! The subcommands. Each resolves its inputs from the config and returns a
//! report; check-type commands also set `pass`.

use flatquant::geometry::{bracket_obstruction, compatible_triple, BracketOptions, MetricChart, PhasePoint};
use flatquant::heatkernel::{rho_s1, rho_spaceform, LatticeKernel};
use flatquant::hilbert::{
    apply_operator, inner_q, inner_q_closed, inner_qc, inner_qc_closed, sb_transform, sb_transform_quadrature,
    BasePoint, BasisOptions, BasisSumKernel, CircleIntegralKernel, EuclideanKernel, HolomorphicMeasure,
    OperatorKernel, QuadOptions,
};
use flatquant::propagator::{convergence_sweep, Engine, PropagatorSpace};
use flatquant::quadrature::{DEFAULT_CELL_NODES, DEFAULT_GAUSS_NODES};
use flatquant::spaceform::{apply, is_invariant, Family, InvarianceMode, SpaceFormSpec};
use flatquant::{FourierFunction, HolomorphicFunction, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::report::{Node, Report};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Kernel,
    Transform,
    Inner,
    ReproCheck,
    InvarianceCheck,
    Propagator,
    Geometry,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Kernel => "kernel",
            Command::Transform => "transform",
            Command::Inner => "inner",
            Command::ReproCheck => "repro-check",
            Command::InvarianceCheck => "invariance-check",
            Command::Propagator => "propagator",
            Command::Geometry => "geometry",
        }
    }
}

/// Values a command computed, before the common report fields are added.
struct Outcome {
    results: Node,
    pass: Option<bool>,
    tolerance: Option<f64>,
    table: Option<(Vec<&'static str>, Vec<Vec<Node>>)>,
}

impl Outcome {
    fn plain(results: Node) -> Self {
        Self {
            results,
            pass: None,
            tolerance: None,
            table: None,
        }
    }

    fn check(results: Node, pass: bool, tolerance: f64) -> Self {
        Self {
            results,
            pass: Some(pass),
            tolerance: Some(tolerance),
            table: None,
        }
    }
}

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Report, CliError> {
    let out = match cmd {
        Command::Kernel => kernel(cfg)?,
        Command::Transform => transform(cfg)?,
        Command::Inner => inner(cfg)?,
        Command::ReproCheck => repro_check(cfg)?,
        Command::InvarianceCheck => invariance_check(cfg)?,
        Command::Propagator => propagator(cfg)?,
        Command::Geometry => geometry(cfg)?,
    };
    Ok(Report {
        command: cmd.name().to_string(),
        config_hash: cfg.hash(),
        inputs: cfg.resolved(),
        results: out.results,
        pass: out.pass,
        tolerance: out.tolerance,
        table: out.table,
    })
}

fn base_point(cfg: &RunConfig, spec: &SpaceFormSpec) -> Result<BasePoint, CliError> {
    let b = cfg.list("base", &vec![0.0; spec.dim])?;
    if b.len() != spec.dim {
        return Err(CliError::config("base", format!("needs {} coordinates", spec.dim)));
    }
    Ok(BasePoint(b))
}

fn default_function(dim: usize) -> String {
    let mut idx = vec!["0"; dim];
    idx[0] = "1";
    format!("{} : 1 0", idx.join(" "))
}

fn quad_options(cfg: &RunConfig, cell: usize, gauss: usize) -> Result<QuadOptions, CliError> {
    Ok(QuadOptions {
        cell_nodes: cfg.usize("quad.cell_nodes", cell)?,
        gauss_nodes: cfg.usize("quad.gauss_nodes", gauss)?,
        kernel_tol: cfg.positive("kernel.tol", 1e-14)?,
        ..QuadOptions::default()
    })
}

fn coefficients(f: &FourierFunction) -> Node {
    Node::Arr(
        f.indexed()
            .map(|(k, c)| Node::obj().with("index", k.clone()).with("coefficient", *c))
            .collect(),
    )
}

fn kernel(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.space_form()?;
    let t = cfg.positive("t", 1.0)?;
    let base = base_point(cfg, &spec)?;
    let x = cfg.list("kernel.x", &base.0)?;
    if x.len() != spec.dim {
        return Err(CliError::config("kernel.x", format!("needs {} coordinates", spec.dim)));
    }
    let tol = cfg.positive("kernel.tol", 1e-14)?;
    let value = rho_spaceform(&x, &base.0, t, &spec, tol)?;
    let lk = LatticeKernel::new(&spec, t, tol, 0.0)?;
    let mut results = Node::obj()
        .with("value", value)
        .with("truncation_radius", lk.radius())
        .with("terms", lk.len());
    if spec.family == Family::Circle {
        results = results.with("value_circle_series", rho_s1(x[0], base.0[0], t, tol)?);
    }
    Ok(Outcome::plain(results))
}

fn transform(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.space_form()?;
    let t = cfg.positive("t", 1.0)?;
    let f = cfg.function("function.f", &spec, &default_function(spec.dim))?;
    let default_points = ["0.5 0.25", "-1.0 -0.5", "2.0 1.0"]
        .map(|p| vec![p; spec.dim].join(" "))
        .join("; ");
    let points = cfg.points("transform.points", spec.dim, &default_points)?;
    let opts = quad_options(cfg, DEFAULT_CELL_NODES, DEFAULT_GAUSS_NODES)?;
    let HolomorphicFunction::Periodic(psi) = sb_transform(&f, t)? else {
        unreachable!("transform of a Fourier function is periodic")
    };
    let psi_fn = HolomorphicFunction::Periodic(psi.clone());
    let mut worst: f64 = 0.0;
    let mut values = Vec::with_capacity(points.len());
    for z in &points {
        let closed = psi_fn.eval(z);
        let quad = sb_transform_quadrature(&f, &spec, t, z, &opts)?;
        worst = worst.max((closed - quad).norm());
        values.push(
            Node::obj()
                .with("z", z.clone())
                .with("closed", closed)
                .with("quadrature", quad)
                .with("abs_diff", (closed - quad).norm()),
        );
    }
    Ok(Outcome::plain(
        Node::obj()
            .with("coefficients", coefficients(&psi))
            .with("values", Node::Arr(values))
            .with("max_abs_diff", worst),
    ))
}

fn dual(v: flatquant::hilbert::DualValue) -> Node {
    Node::obj()
        .with("closed", v.closed)
        .with("quadrature", v.quadrature)
        .with("discrepancy", v.discrepancy())
}

fn inner(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.space_form()?;
    let t = cfg.positive("t", 1.0)?;
    let base = base_point(cfg, &spec)?;
    let default_f = default_function(spec.dim);
    let f = cfg.function("function.f", &spec, &default_f)?;
    let g = cfg.function("function.g", &spec, &default_f)?;
    let opts = quad_options(cfg, DEFAULT_CELL_NODES, 40)?;
    let q = inner_q(&f, &g, &spec, &base, t, &opts)?;
    let (af, ag) = (sb_transform(&f, t)?, sb_transform(&g, t)?);
    let qc = inner_qc(&af, &ag, &spec, &base, t, &opts)?;
    let nf = inner_q_closed(&f, &f, &base, t)?.re;
    let ng = inner_q_closed(&g, &g, &base, t)?.re;
    let iso = (inner_qc_closed(&af, &ag, &base, t)? - q.closed).norm() / (nf * ng).sqrt();
    Ok(Outcome::plain(
        Node::obj()
            .with("inner_q", dual(q))
            .with("inner_qc_transformed", dual(qc))
            .with("isometry_defect", iso),
    ))
}

/// Uniform real parts over the cell, imaginary parts in `[−strip, strip]`.
fn strip_points(spec: &SpaceFormSpec, count: usize, strip: f64, seed: u64) -> Vec<Vec<C64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let frac: Vec<f64> = (0..spec.dim).map(|_| rng.gen_range(0.0..1.0)).collect();
            let x = spec.translation_basis.to_cartesian(&frac);
            x.into_iter()
                .map(|re| C64::new(re, if strip > 0.0 { rng.gen_range(-strip..=strip) } else { 0.0 }))
                .collect()
        })
        .collect()
}

fn repro_check(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let tol = cfg.positive("check.tol", 1e-7)?;
    let t = cfg.positive("t", 1.0)?;
    let count = cfg.usize("repro.points", 20)?;
    let strip = cfg.f64("repro.strip", 1.5)?.abs();
    let seed = cfg.usize("repro.seed", 0)? as u64;
    let space = cfg.string("repro.space", "auto");
    let (kernel, phi, measure, points): (Box<dyn OperatorKernel>, HolomorphicFunction, HolomorphicMeasure, _) =
        if space == "euclidean" {
            let degree = cfg.usize("repro.degree", 3)?;
            let gauss = cfg.usize("quad.gauss_nodes", 48)?;
            let measure = HolomorphicMeasure::euclidean(1, t, gauss)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let points = (0..count)
                .map(|_| vec![C64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-strip..=strip))])
                .collect();
            (
                Box::new(EuclideanKernel { t }),
                HolomorphicFunction::monomial(degree, C64::new(1.0, 0.0)),
                measure,
                points,
            )
        } else if space == "auto" {
            let spec = cfg.space_form()?;
            let base = base_point(cfg, &spec)?;
            let f = cfg.function("function.f", &spec, &default_function(spec.dim))?;
            let points = strip_points(&spec, count, strip, seed);
            let kernel_tol = cfg.positive("kernel.tol", 1e-15)?;
            let (kernel, cell, gauss): (Box<dyn OperatorKernel>, usize, usize) = if spec.family == Family::Circle {
                let nodes = cfg.usize("repro.kernel_nodes", 96)?;
                let reach = strip.max(12.0);
                (Box::new(CircleIntegralKernel::new(t, base.0[0], nodes, reach, kernel_tol)?), 48, 64)
            } else {
                let opts = BasisOptions {
                    strip: strip.max(1.0),
                    kernel_tol,
                    ..BasisOptions::default()
                };
                (Box::new(BasisSumKernel::new(&spec, &base, t, &opts)?), 12, 48)
            };
            let cell = cfg.usize("quad.cell_nodes", cell)?;
            let gauss = cfg.usize("quad.gauss_nodes", gauss)?;
            let measure = HolomorphicMeasure::space_form(&spec, &base, t, cell, gauss, kernel_tol)?;
            (kernel, HolomorphicFunction::Periodic(f), measure, points)
        } else {
            return Err(CliError::config("repro.space", format!("expected auto or euclidean, got `{space}`")));
        };
    let out = apply_operator(kernel.as_ref(), &phi, &measure, &points)?;
    let mut worst: f64 = 0.0;
    let mut rows = Vec::with_capacity(points.len());
    for (z, v) in points.iter().zip(&out) {
        let expect = phi.eval(z);
        let rel = (v - expect).norm() / expect.norm();
        worst = worst.max(rel);
        rows.push(
            Node::obj()
                .with("z", z.clone())
                .with("applied", *v)
                .with("expected", expect)
                .with("rel_err", rel),
        );
    }
    let results = Node::obj().with("max_rel_err", worst).with("points", Node::Arr(rows));
    Ok(Outcome::check(results, worst < tol, tol))
}

fn invariance_check(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let tol = cfg.positive("check.tol", 1e-10)?;
    let spec = cfg.space_form()?;
    let t = cfg.positive("t", 1.0)?;
    let base = base_point(cfg, &spec)?;
    let samples = cfg.usize("invariance.samples", 25)?;
    let kernel_tol = cfg.positive("kernel.tol", 1e-14)?;
    let seed = cfg.usize("repro.seed", 0)? as u64;
    let points: Vec<Vec<f64>> = strip_points(&spec, samples, 0.0, seed)
        .into_iter()
        .map(|p| p.iter().map(|c| c.re).collect())
        .collect();
    let mut worst: f64 = 0.0;
    let mut per_generator = Vec::new();
    for (i, g) in spec.group_generators().iter().enumerate() {
        let gx0 = apply(g, &base.0)?;
        let mut dev: f64 = 0.0;
        for x in &points {
            let gx = apply(g, x)?;
            let a = rho_spaceform(&gx, &gx0, t, &spec, kernel_tol)?;
            let b = rho_spaceform(x, &base.0, t, &spec, kernel_tol)?;
            dev = dev.max((a - b).abs());
        }
        worst = worst.max(dev);
        per_generator.push(Node::obj().with("generator", i).with("max_deviation", dev));
    }
    let mut results = Node::obj()
        .with("max_deviation", worst)
        .with("generators", Node::Arr(per_generator));
    if cfg.has("function.f") {
        let f = cfg.function("function.f", &spec, "")?;
        let mut flags = Vec::new();
        for g in spec.group_generators() {
            flags.push(Node::Bool(is_invariant(&f, &g, 1e-12, InvarianceMode::Coefficients)?));
        }
        results = results.with("function_invariant", Node::Arr(flags));
    }
    Ok(Outcome::check(results, worst < tol, tol))
}

fn propagator(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let one = [C64::new(1.0, 0.0)];
    let z_t = single(cfg, "propagator.z_t", &one)?;
    let z_0 = single(cfg, "propagator.z_0", &one)?;
    let time = cfg.f64("propagator.time", 1.0)?;
    let default_n: Vec<f64> = (0..=8).map(|k| f64::from(1u32 << k)).collect();
    let n_list: Vec<usize> = cfg
        .list("propagator.n_list", &default_n)?
        .into_iter()
        .map(|v| {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(CliError::config("propagator.n_list", format!("`{v}` is not a positive integer")))
            }
        })
        .collect::<Result<_, _>>()?;
    let engine = match cfg.string("propagator.engine", "closed").as_str() {
        "closed" => Engine::GaussianClosedForm,
        "quadrature" => Engine::Quadrature,
        other => {
            return Err(CliError::config(
                "propagator.engine",
                format!("expected closed or quadrature, got `{other}`"),
            ))
        }
    };
    let space = PropagatorSpace {
        t: cfg.positive("t", 1.0)?,
        gauss_nodes: cfg.usize("propagator.gauss_nodes", 48)?,
        ..PropagatorSpace::default()
    };
    let rows = convergence_sweep(z_t, z_0, time, &n_list, engine, &space)?;
    let exact = flatquant::propagator::exact_oscillator_kernel(&[z_t], &[z_0], time, space.t);
    let table: Vec<Vec<Node>> = rows
        .iter()
        .map(|r| {
            vec![
                Node::from(r.n),
                r.value.re.into(),
                r.value.im.into(),
                r.abs_error.into(),
                r.order_estimate.into(),
            ]
        })
        .collect();
    let json_rows = rows
        .iter()
        .map(|r| {
            Node::obj()
                .with("n", r.n)
                .with("value", r.value)
                .with("abs_error", r.abs_error)
                .with("ratio", r.ratio)
                .with("order_estimate", r.order_estimate)
        })
        .collect::<Vec<_>>();
    Ok(Outcome {
        results: Node::obj().with("exact", exact).with("rows", Node::Arr(json_rows)),
        pass: None,
        tolerance: None,
        table: Some((vec!["n", "Re G_n", "Im G_n", "abs_error", "order_estimate"], table)),
    })
}

fn single(cfg: &RunConfig, key: &str, default: &[C64]) -> Result<C64, CliError> {
    match cfg.complex_list(key, default)?.as_slice() {
        [z] => Ok(*z),
        _ => Err(CliError::config(key, "expected one complex number `re im`")),
    }
}

fn matrices(ms: &[nalgebra::DMatrix<C64>]) -> Node {
    Node::Arr(
        ms.iter()
            .map(|m| {
                Node::Arr(
                    (0..m.nrows())
                        .map(|i| Node::Arr((0..m.ncols()).map(|j| Node::complex(m[(i, j)])).collect()))
                        .collect(),
                )
            })
            .collect(),
    )
}

fn geometry(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let name = cfg.string("geometry.metric", "sphere");
    let chart = MetricChart::by_name(&name).map_err(|e| CliError::config("geometry.metric", e.to_string()))?;
    let q = cfg.list("geometry.q", &[std::f64::consts::FRAC_PI_4, 0.0])?;
    let p = cfg.list("geometry.p", &[1.0, 0.0])?;
    let richardson = cfg.bool("geometry.richardson", true)?;
    let m = PhasePoint::new(q, p).map_err(|e| CliError::config("geometry.q", e.to_string()))?;
    let tri = compatible_triple(&chart, &m)?;
    let n2 = 2 * tri.dim();
    let mut compat: f64 = 0.0;
    for a in 0..n2 {
        for b in 0..n2 {
            let (mut v, mut w) = (vec![0.0; n2], vec![0.0; n2]);
            v[a] = 1.0;
            w[b] = 1.0;
            compat = compat.max(tri.compatibility_defect(&v, &w));
        }
    }
    let ob = bracket_obstruction(&chart, &m, &BracketOptions { richardson })?;
    let results = Node::obj()
        .with("metric", chart.name())
        .with("j_square_defect", tri.j_square_defect())
        .with("compatibility_defect", compat)
        .with("measured", matrices(&ob.measured))
        .with("predicted", matrices(&ob.predicted))
        .with("max_measured", ob.max_measured())
        .with("max_predicted", ob.max_predicted())
        .with("noise_floor", ob.noise_floor)
        .with("horizontal_residual", ob.horizontal_residual)
        .with(
            "relative_mismatch",
            if ob.max_predicted() > 0.0 {
                Node::Num(ob.relative_mismatch(1.0))
            } else {
                Node::Null
            },
        )
        .with("fitted_scale", ob.fitted_scale());
    Ok(Outcome::plain(results))
}
