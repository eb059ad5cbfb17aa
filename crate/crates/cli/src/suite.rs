//! The numbered acceptance checks. Each check builds its own fields from
//! the configured seed, so outcomes depend only on the configuration.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use geotomo::gauge::{boundary_gauge_normalize, GaugeOptions};
use geotomo::geometry::{DiskDomain, ModelPair, Region, TraceOptions};
use geotomo::mesh::{CovScalarPair, Discretization, DiskMesh, PairField};
use geotomo::normal_op::{
    ellipticity_check, normal_apply_direct_batch, principal_symbol, symbol_oscillatory_test,
    ComposedNormal, OscillatoryOptions,
};
use geotomo::recon::{
    perturbation_study, random_smooth_pair, reconstruct_solenoidal, stability_ratio_experiment,
    PerturbationDirection, PerturbationOptions, ReconOptions,
};
use geotomo::solenoidal::manufactured::{manufactured_error, trace_experiment};
use geotomo::solenoidal::{Projector, Stiffness};
use geotomo::xray::{
    ray_integral, transport_solve, AdjointPlan, FanBeamData, FanBeamGrid, RayPlan,
};
use geotomo::{c64, Complex64, GeoError, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::{CliError, Config};

/// Acceptance bound on a measured value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
    Below(f64),
    Above(f64),
    Within(f64, f64),
}

impl Bound {
    fn holds(self, value: f64) -> bool {
        match self {
            Bound::AtMost(b) => value <= b,
            Bound::AtLeast(b) => value >= b,
            Bound::Below(b) => value < b,
            Bound::Above(b) => value > b,
            Bound::Within(lo, hi) => (lo..=hi).contains(&value),
        }
    }

    fn describe(self) -> String {
        match self {
            Bound::AtMost(b) => format!("<= {b:.4e}"),
            Bound::AtLeast(b) => format!(">= {b:.4e}"),
            Bound::Below(b) => format!("< {b:.4e}"),
            Bound::Above(b) => format!("> {b:.4e}"),
            Bound::Within(lo, hi) => format!("in [{lo}, {hi}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measurement {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub measurements: Vec<Measurement>,
    pub error: Option<String>,
}

impl Outcome {
    fn new(id: u8, title: &'static str) -> Self {
        Outcome {
            id,
            title,
            passed: true,
            measurements: Vec::new(),
            error: None,
        }
    }

    fn check(&mut self, name: impl Into<String>, value: f64, bound: Bound) {
        let passed = bound.holds(value);
        self.passed &= passed;
        self.measurements.push(Measurement {
            name: name.into(),
            value,
            bound,
            passed,
        });
    }

    fn at_most(&mut self, name: impl Into<String>, value: f64, bound: f64) {
        self.check(name, value, Bound::AtMost(bound))
    }

    fn at_least(&mut self, name: impl Into<String>, value: f64, bound: f64) {
        self.check(name, value, Bound::AtLeast(bound))
    }

    /// A yes/no property, recorded as 1 or 0.
    fn flag(&mut self, name: &str, holds: bool) {
        self.at_least(name, f64::from(u8::from(holds)), 1.0)
    }

    fn failed(id: u8, title: &'static str, e: &CliError) -> Self {
        Outcome {
            id,
            title,
            passed: false,
            measurements: Vec::new(),
            error: Some(e.to_string()),
        }
    }

    /// One line: id, verdict, title and every measurement.
    pub fn summary(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let mut line = format!("criterion {:>2} {verdict}  {}", self.id, self.title);
        for m in &self.measurements {
            line.push_str(&format!(
                "; {} = {:.4e} {}",
                m.name,
                m.value,
                m.bound.describe()
            ));
        }
        if let Some(e) = &self.error {
            line.push_str(&format!("; error: {e}"));
        }
        line
    }
}

pub const CRITERIA: [(u8, &str); 12] = [
    (1, "gauge pairs have vanishing transform"),
    (2, "analytic adjoint pairs with the forward transform"),
    (3, "transport solution matches the ray integral"),
    (4, "solenoidal decomposition"),
    (5, "elliptic solver convergence order"),
    (6, "direct and composed normal operator agree"),
    (7, "principal symbol"),
    (8, "boundary trace recovery"),
    (9, "boundary gauge normalization"),
    (10, "reconstruction of a solenoidal phantom"),
    (11, "stability ratio spread"),
    (12, "perturbation scaling and solenoidal floor"),
];

/// Runs one check. Numerical failures become a failed outcome carrying the
/// error message.
pub fn run(id: u8, config: &Config) -> Outcome {
    let title = CRITERIA
        .iter()
        .find(|c| c.0 == id)
        .map_or("unknown criterion", |c| c.1);
    let mut out = Outcome::new(id, title);
    let result = match id {
        1 => gauge_annihilation(config, &mut out),
        2 => adjoint_pairing(config, &mut out),
        3 => transport(config, &mut out),
        4 => decomposition(config, &mut out),
        5 => convergence_order(config, &mut out),
        6 => normal_agreement(config, &mut out),
        7 => symbol(config, &mut out),
        8 => trace_recovery(config, &mut out),
        9 => gauge_normalization(config, &mut out),
        10 => reconstruction(config, &mut out),
        11 => stability(config, &mut out),
        12 => perturbation(config, &mut out),
        _ => Err(CliError::Config(format!("no criterion {id}"))),
    };
    match result {
        Ok(()) => out,
        Err(e) => Outcome::failed(id, title, &e),
    }
}

type Step = Result<(), CliError>;

fn rng(config: &Config, id: u8) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(config.seed ^ ((id as u64) << 40))
}

fn gaussian<R: Rng>(rng: &mut R) -> Complex64 {
    c64(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

struct Setup {
    model: ModelPair,
    domain: DiskDomain,
}

impl Setup {
    fn new(config: &Config) -> Result<Self, CliError> {
        Ok(Setup {
            model: config.model()?,
            domain: config.domain()?,
        })
    }

    fn mesh(&self, h: f64) -> Result<Arc<DiskMesh>, CliError> {
        Ok(Arc::new(DiskMesh::with_domain(h, self.domain)?))
    }

    fn disc(&self, h: f64) -> Result<Discretization, CliError> {
        Ok(Discretization::new(self.mesh(h)?, self.model.clone()))
    }
}

/// Parameters of a smooth generator `[w, φ]` supported strictly inside `M`.
struct InteriorPotential {
    center: Vec2,
    radius: f64,
    coef: [[Complex64; 3]; 3],
}

impl InteriorPotential {
    fn draw<R: Rng>(rng: &mut R, domain: &DiskDomain) -> Self {
        let radius = 0.4 * domain.radius_m;
        let r = (domain.radius_m - radius) * 0.75 * rng.random::<f64>().sqrt();
        let t = TAU * rng.random::<f64>();
        InteriorPotential {
            center: Vec2::new(r * t.cos(), r * t.sin()),
            radius,
            coef: std::array::from_fn(|_| std::array::from_fn(|_| gaussian(rng))),
        }
    }

    fn field(&self, mesh: &Arc<DiskMesh>) -> CovScalarPair {
        let mut w = CovScalarPair::from_fn(mesh, Region::Inner, |x| {
            let d = x - self.center;
            let b = (1.0 - d.norm_squared() / (self.radius * self.radius))
                .max(0.0)
                .powi(4);
            std::array::from_fn(|c| {
                b * (self.coef[c][0] + self.coef[c][1] * d[0] + self.coef[c][2] * d[1])
            })
        });
        w.zero_boundary();
        w
    }
}

fn gauge_ratio(
    setup: &Setup,
    config: &Config,
    h: f64,
    potentials: &[InteriorPotential],
) -> Result<f64, CliError> {
    let disc = setup.disc(h)?;
    let mesh = disc.mesh();
    let grid = config.grid(Region::Inner)?;
    let plan = RayPlan::new(&setup.model, mesh, grid, &TraceOptions::for_mesh_spacing(h))?;
    let mut worst = 0.0f64;
    for p in potentials {
        let f = disc.apply_d_a(&p.field(mesh));
        worst = worst.max(plan.apply(&f)?.norm() / disc.pair_norm(&f)?);
    }
    Ok(worst)
}

fn gauge_annihilation(config: &Config, out: &mut Outcome) -> Step {
    let setup = Setup::new(config)?;
    let mut rng = rng(config, 1);
    let potentials: Vec<InteriorPotential> = (0..10)
        .map(|_| InteriorPotential::draw(&mut rng, &setup.domain))
        .collect();
    let h = config.mesh_spacing;
    let coarse = gauge_ratio(&setup, config, h, &potentials)?;
    let fine = gauge_ratio(&setup, config, h / 2.0, &potentials)?;
    out.at_most("ratio at h", coarse, 1e-2);
    out.at_most("ratio at h/2 over ratio at h", fine / coarse, 0.6);
    Ok(())
}

/// Smooth random fan-beam data: low trigonometric modes in `β` with affine
/// dependence on `θ`.
struct SmoothData {
    modes: Vec<(i32, Complex64, Complex64)>,
}

impl SmoothData {
    fn draw<R: Rng>(rng: &mut R) -> Self {
        SmoothData {
            modes: (-2..=2)
                .map(|m| (m, gaussian(rng), gaussian(rng)))
                .collect(),
        }
    }

    fn sample(&self, grid: FanBeamGrid, setup: &Setup) -> FanBeamData {
        let tm = grid.theta_max();
        FanBeamData::from_fn(grid, &setup.model.metric, |b, t| {
            self.modes
                .iter()
                .map(|(m, c, d)| Complex64::from_polar(1.0, *m as f64 * b) * (c + d * (t / tm)))
                .sum()
        })
    }
}

fn pairing_defect(
    setup: &Setup,
    config: &Config,
    level: usize,
    seed: u64,
) -> Result<f64, CliError> {
    let h = config.mesh_spacing * level as f64;
    let disc = setup.disc(h)?;
    let mesh = disc.mesh();
    let fb = &config.fan_beam;
    let grid = FanBeamGrid::new(
        fb.n_beta / level,
        fb.n_theta / level,
        fb.delta_theta,
        Region::Inner,
        &setup.domain,
    )?;
    let trace = TraceOptions::for_mesh_spacing(h);
    let plan = RayPlan::new(&setup.model, mesh, grid, &trace)?;
    let adjoint = AdjointPlan::new(&setup.model, mesh, grid, config.n_dir / level, &trace)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let f = random_smooth_pair(mesh, Region::Inner, &mut rng, 4, 0.5);
        let w = SmoothData::draw(&mut rng).sample(grid, setup);
        let if_ = plan.apply(&f)?;
        let iw = adjoint.apply(&w)?;
        let lhs = if_.inner(&w)?;
        let rhs = disc.pair_inner(&f, &iw)?;
        let scale = if_.norm() * w.norm() + disc.pair_norm(&f)? * disc.pair_norm(&iw)?;
        worst = worst.max((lhs - rhs).norm() / scale);
    }
    Ok(worst)
}

fn adjoint_pairing(config: &Config, out: &mut Outcome) -> Step {
    let setup = Setup::new(config)?;
    let seed = rng(config, 2).random::<u64>();
    let fine = pairing_defect(&setup, config, 1, seed)?;
    let coarse = pairing_defect(&setup, config, 2, seed)?;
    out.at_most("pairing defect at h", fine, 1e-2);
    out.check("pairing defect at h vs 2h", fine, Bound::Below(coarse));
    Ok(())
}

fn transport(config: &Config, out: &mut Outcome) -> Step {
    let setup = Setup::new(config)?;
    let h = config.mesh_spacing;
    let mesh = setup.mesh(h)?;
    let mut rng = rng(config, 3);
    let f = random_smooth_pair(&mesh, Region::Inner, &mut rng, 6, 0.4);
    let grid = config.grid(Region::Inner)?;
    let trace = config.trace();
    let mut worst = 0.0f64;
    for _ in 0..config.experiments.transport_rays {
        let beta = TAU * rng.random::<f64>();
        let theta = grid.theta_max() * (2.0 * rng.random::<f64>() - 1.0);
        let (x, v) = grid.ray(&setup.model.metric, beta, theta);
        let u = transport_solve(&setup.model, &f, &x, &v, &trace)?;
        let i = ray_integral(&setup.model, &f, &x, &v, &trace)?;
        worst = worst.max((u - i).norm() / i.norm().max(f64::MIN_POSITIVE));
    }
    out.at_most("relative transport defect", worst, 1e-6);
    Ok(())
}

fn decomposition(config: &Config, out: &mut Outcome) -> Step {
    let setup = Setup::new(config)?;
    let disc = setup.disc(config.mesh_spacing)?;
    let mesh = disc.mesh().clone();
    let projector = Projector::new(&disc, Region::Inner)?;
    let mut rng = rng(config, 4);
    let (mut div, mut idem, mut complete) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..3 {
        let f = PairField::smoothed_noise(&mesh, Region::Inner, &mut rng, 2);
        let split = projector.project(&f)?;
        let again = projector.solenoidal(&split.solenoidal)?;
        div = div.max(split.residuals.divergence_dual);
        idem = idem.max(disc.pair_norm(&(&again - &split.solenoidal))? / disc.pair_norm(&f)?);
        complete = complete.max(split.residuals.completeness / f.max_abs());
    }
    let mut gauge = 0.0f64;
    for _ in 0..3 {
        let g = disc.apply_d_a(&InteriorPotential::draw(&mut rng, &setup.domain).field(&mesh));
        gauge = gauge.max(disc.pair_norm(&projector.solenoidal(&g)?)? / disc.pair_norm(&g)?);
    }
    out.at_most("relative weak divergence", div, 1e-6);
    out.at_most("idempotence defect", idem, 1e-6);
    out.at_most("solenoidal part of a gauge pair", gauge, 1e-2);
    out.at_most("completeness", complete, 1e-10);
    Ok(())
}

fn convergence_order(config: &Config, out: &mut Outcome) -> Step {
    let model = config.model()?;
    let h = config.mesh_spacing;
    for (name, kind) in [
        ("nodal", Stiffness::Nodal),
        ("galerkin", Stiffness::Galerkin),
    ] {
        let coarse = manufactured_error(2.0 * h, &model, kind)?;
        let fine = manufactured_error(h, &model, kind)?;
        out.at_least(format!("{name} order"), (coarse / fine).log2(), 1.8);
    }
    Ok(())
}

fn normal_agreement(config: &Config, out: &mut Outcome) -> Step {
    let setup = Setup::new(config)?;
    let disc = setup.disc(config.mesh_spacing)?;
    let mesh = disc.mesh();
    let normal = config.normal();
    let composed = ComposedNormal::new(&setup.model, mesh, &normal)?;
    let mut rng = rng(config, 6);
    let r = setup.domain.radius_m;
    let fields: Vec<PairField> = (0..5)
        .map(|_| {
            let f = random_smooth_pair(mesh, Region::Inner, &mut rng, 4, 0.4);
            f.map_nodes(|i, v| {
                let c = (1.0 - mesh.node(i).norm_squared() / (r * r))
                    .max(0.0)
                    .powi(2);
                v.map(|z| z * c)
            })
        })
        .collect();
    let direct = normal_apply_direct_batch(&setup.model, &fields, &normal)?;
    let (mut agree, mut adjoint, mut positive) = (0.0f64, 0.0f64, f64::INFINITY);
    for (k, (f, d)) in fields.iter().zip(&direct).enumerate() {
        let c = composed.apply(f)?;
        agree = agree.max(disc.pair_norm(&(d - &c))? / disc.pair_norm(d)?);
        let fe = f.extend_by_zero(Region::Extended)?;
        let n2 = disc.pair_norm(&fe)?.powi(2);
        positive = positive.min(disc.pair_inner(d, &fe)?.re / n2);
        let (g, dg) = (
            &fields[(k + 1) % fields.len()],
            &direct[(k + 1) % fields.len()],
        );
        let ge = g.extend_by_zero(Region::Extended)?;
        let lhs = disc.pair_inner(d, &ge)?;
        let rhs = disc.pair_inner(&fe, dg)?;
        adjoint = adjoint.max((lhs - rhs).norm() / lhs.norm().max(rhs.norm()));
    }
    out.at_most("direct vs composed", agree, 2e-2);
    out.at_most("self-adjointness defect", adjoint, 1e-2);
    out.at_least("min Re<NF, F> / |F|^2", positive, -1e-3);
    Ok(())
}

fn symbol(config: &Config, out: &mut Outcome) -> Step {
    let setup = Setup::new(config)?;
    let radius = setup.domain.radius_mt;
    let trace = config.trace();
    let mut rng = rng(config, 7);
    let random_xi = |rng: &mut ChaCha8Rng| {
        let (s, t) = (0.5 + 1.5 * rng.random::<f64>(), TAU * rng.random::<f64>());
        Vec2::new(s * t.cos(), s * t.sin())
    };
    let random_x = |rng: &mut ChaCha8Rng, r: f64| {
        let (s, t) = (r * rng.random::<f64>().sqrt(), TAU * rng.random::<f64>());
        Vec2::new(s * t.cos(), s * t.sin())
    };

    let flat = ModelPair::euclidean_unattenuated();
    let mut closed_form = 0.0f64;
    for _ in 0..10 {
        let (x, xi) = (
            random_x(&mut rng, 0.5 * setup.domain.radius_m),
            random_xi(&mut rng),
        );
        let e = principal_symbol(&flat, radius, &x, &xi, &trace)?.min_restricted_eig();
        let expect = 4.0 * PI / xi.norm();
        closed_form = closed_form.max((e - expect).abs() / expect);
    }
    out.at_most("flat restricted eigenvalue vs 4π/|ξ|", closed_form, 1e-10);

    let samples: Vec<(Vec2, Vec2)> = (0..config.experiments.ellipticity_samples)
        .map(|_| {
            (
                random_x(&mut rng, 0.95 * setup.domain.radius_m),
                random_xi(&mut rng),
            )
        })
        .collect();
    let report = ellipticity_check(&setup.model, radius, &samples, &trace)?;
    out.check(
        "min restricted eigenvalue",
        report.min_restricted_eig,
        Bound::Above(0.0),
    );

    let h = config.mesh_spacing / 2.0;
    let mesh = setup.mesh(h)?;
    let e = &config.experiments;
    let x = Vec2::new(e.symbol_point[0], e.symbol_point[1]);
    let xi = Vec2::new(e.symbol_covector[0], e.symbol_covector[1]);
    // Solenoidal direction: ω ⊗ ω and ω with ω ⟂ ξ.
    let w = Vec2::new(-xi[1], xi[0]) / xi.norm();
    let p0 = [w[0] * w[0], w[0] * w[1], w[1] * w[1], w[0], w[1]].map(|c| c64(c, 0.0));
    let opts = OscillatoryOptions::for_mesh_spacing(h);
    let defects = e
        .frequencies
        .iter()
        .map(|&l| Ok(symbol_oscillatory_test(&setup.model, &mesh, &x, &xi, l, &p0, &opts)?.defect))
        .collect::<Result<Vec<f64>, CliError>>()?;
    for (l, d) in e.frequencies.windows(2).zip(defects.windows(2)) {
        out.check(
            format!("defect at λ = {} vs λ = {}", l[1], l[0]),
            d[1],
            Bound::Below(d[0]),
        );
    }
    Ok(())
}

fn trace_recovery(config: &Config, out: &mut Outcome) -> Step {
    let r = trace_experiment(&config.model()?, config.mesh_spacing)?;
    out.at_most("trace error", r.trace_error, 5e-2);
    out.at_most("interior error", r.interior_error, 5e-2);
    Ok(())
}

fn gauge_normalization(config: &Config, out: &mut Outcome) -> Step {
    let setup = Setup::new(config)?;
    let disc = setup.disc(config.mesh_spacing)?;
    let mut rng = rng(config, 9);
    let f = random_smooth_pair(disc.mesh(), Region::Inner, &mut rng, 6, 0.6);
    let opts = GaugeOptions {
        collar: config.experiments.gauge_collar,
        ..GaugeOptions::default()
    };
    let r = boundary_gauge_normalize(&disc, &f, &opts)?;
    out.at_most(
        "normal residual / max |F|",
        r.max_normal_residual / r.input_max,
        1e-2,
    );
    out.at_most("identity residual", r.identity_residual, 1e-8);
    Ok(())
}

fn reconstruction(config: &Config, out: &mut Outcome) -> Step {
    let setup = Setup::new(config)?;
    let disc = setup.disc(config.mesh_spacing)?;
    let mesh = disc.mesh().clone();
    let plan = RayPlan::new(
        &setup.model,
        &mesh,
        config.grid(Region::Inner)?,
        &config.trace(),
    )?;
    let projector = Projector::new(&disc, Region::Inner)?;
    let mut rng = rng(config, 10);
    let raw = random_smooth_pair(
        &mesh,
        Region::Inner,
        &mut rng,
        config.phantom.bumps,
        config.phantom.width,
    );
    let truth = projector.solenoidal(&raw)?;
    let data = plan.apply(&truth)?;
    let opts = ReconOptions {
        noise: 0.0,
        ..config.recon()
    };
    let (report, _) = reconstruct_solenoidal(&disc, &plan, &data, Some(&truth), &opts)?;
    let error = report
        .relative_error
        .ok_or(GeoError::Contract("missing ground truth".into()))?;
    out.at_most("relative error", error, 5e-2);
    out.at_most("iterations", report.iterations as f64, opts.max_iter as f64);
    out.flag("monotone residual", report.is_monotone());

    let noisy = ReconOptions {
        noise: 1e-2,
        ..opts
    };
    let (report, _) = reconstruct_solenoidal(&disc, &plan, &data, Some(&truth), &noisy)?;
    let noisy_error = report
        .relative_error
        .ok_or(GeoError::Contract("missing ground truth".into()))?;
    out.at_most("relative error at 1% noise", noisy_error, error + 0.1);

    let g = disc.apply_d_a(&InteriorPotential::draw(&mut rng, &setup.domain).field(&mesh));
    let (_, recovered) = reconstruct_solenoidal(&disc, &plan, &plan.apply(&g)?, None, &opts)?;
    out.at_most(
        "gauge data recovers |S F| / |F|",
        disc.pair_norm(&recovered)? / disc.pair_norm(&g)?,
        5e-2,
    );
    Ok(())
}

fn stability(config: &Config, out: &mut Outcome) -> Step {
    let setup = Setup::new(config)?;
    let disc = setup.disc(config.mesh_spacing)?;
    let normal = ComposedNormal::new(&setup.model, disc.mesh(), &config.normal())?;
    let seed = rng(config, 11).random::<u64>();
    let n = config.experiments.stability_samples;
    let r = stability_ratio_experiment(&disc, &normal, n, seed)?;
    out.at_least("accepted samples", r.samples as f64, n as f64);
    out.at_most("spread", r.spread, 50.0);
    out.at_least("min ratio", r.min, 1e-8);
    Ok(())
}

fn perturbation(config: &Config, out: &mut Outcome) -> Step {
    let e = &config.experiments;
    let opts = PerturbationOptions {
        domain: config.domain()?,
        spacing: e.perturbation_spacing,
        probes: e.perturbation_probes,
        lanczos_steps: e.lanczos_steps,
        n_dir: config.n_dir,
        seed: rng(config, 12).random::<u64>(),
        ..PerturbationOptions::default()
    };
    let r = perturbation_study(
        &config.model()?,
        &PerturbationDirection::default(),
        &e.perturbation_eps,
        &opts,
    )?;
    for row in &r.scaling {
        out.check(
            format!("normal distance ratio at ε = {}", row.eps),
            row.normal_ratio,
            Bound::Within(1.7, 2.3),
        );
        out.check(
            format!("projection distance ratio at ε = {}", row.eps),
            row.projection_ratio,
            Bound::Within(1.7, 2.3),
        );
    }
    if let (Some(first), Some(last)) = (r.singular_floor.first(), r.singular_floor.last()) {
        let q = last / first;
        out.check(
            "floor ratio, largest over smallest ε",
            q,
            Bound::Within(0.5, 2.0),
        );
    }
    Ok(())
}
