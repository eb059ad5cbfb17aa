//! Subcommands. Every command writes `config.json`, its own artifacts and
//! the manifest into the output directory.

use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Subcommand, ValueEnum};
use geotomo::gauge::{boundary_gauge_normalize, GaugeOptions};
use geotomo::geometry::{simplicity_check_radius, ModelPair, Region, SimplicityReport};
use geotomo::mesh::io::{read_field, write_field, write_nodes, write_triangles};
use geotomo::mesh::{Discretization, DiskMesh, PairField, COV_LABELS, PAIR_LABELS};
use geotomo::normal_op::{
    ellipticity_check, normal_apply_direct, principal_symbol, symbol_oscillatory_test,
    ComposedNormal, OscillatoryOptions, OscillatoryReport, SymbolBlocks,
};
use geotomo::recon::{
    perturbation_study, random_smooth_pair, reconstruct_solenoidal, stability_ratio_experiment,
    PerturbationDirection, PerturbationOptions,
};
use geotomo::solenoidal::manufactured::{analytic_d_a, trace_experiment, vanishing_potential};
use geotomo::solenoidal::{boundary_trace_recover, Projector, RecoveryOptions};
use geotomo::xray::{ray_integral, transport_solve, AdjointPlan, FanBeamData, RayPlan};
use geotomo::{c64, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::artifacts::{sha256_hex, Artifacts};
use crate::config::PhantomKind;
use crate::suite::{self, Outcome, CRITERIA};
use crate::{CliError, Config};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalMethod {
    /// Forward transform followed by its analytic adjoint.
    Composed,
    /// Quadrature of the kernel along full chords.
    Direct,
}

#[derive(Debug, Clone, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Fan-beam data of the configured phantom.
    Forward,
    /// Analytic adjoint of fan-beam data (the phantom's data by default).
    Adjoint {
        /// Fan-beam data CSV on the configured grid.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// The pairing check between forward and adjoint transforms.
    SelftestAdjoint,
    /// Transport solutions against ray integrals on random boundary rays.
    Transport,
    /// Normal operator applied to the phantom, cut off inside M.
    Normal {
        #[arg(long, value_enum, default_value = "composed")]
        method: NormalMethod,
    },
    /// Principal symbol at the configured point and covector.
    Symbol,
    /// Smallest restricted symbol eigenvalue over random samples.
    Ellipticity,
    /// Solenoidal decomposition of the phantom.
    Decompose,
    /// Boundary trace recovery on a manufactured annulus potential.
    TraceRecover,
    /// Boundary gauge normalization of the phantom.
    GaugeNormalize,
    /// Least-squares recovery of the phantom's solenoidal part.
    Reconstruct,
    /// Stability ratio statistics.
    Stability,
    /// Perturbation study around the configured model.
    Perturb,
    /// Every acceptance check; fails if any check fails.
    Selftest,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Forward => "forward",
            Command::Adjoint { .. } => "adjoint",
            Command::SelftestAdjoint => "selftest-adjoint",
            Command::Transport => "transport",
            Command::Normal { .. } => "normal",
            Command::Symbol => "symbol",
            Command::Ellipticity => "ellipticity",
            Command::Decompose => "decompose",
            Command::TraceRecover => "trace-recover",
            Command::GaugeNormalize => "gauge-normalize",
            Command::Reconstruct => "reconstruct",
            Command::Stability => "stability",
            Command::Perturb => "perturb",
            Command::Selftest => "selftest",
        }
    }
}

#[derive(Debug, Serialize)]
struct Simplicity {
    radius: f64,
    report: SimplicityReport,
}

/// Checks simplicity on `M` and `M̃`. A failure is an error unless `force`.
pub fn check_simplicity(
    config: &Config,
    force: bool,
) -> Result<Vec<(f64, SimplicityReport)>, CliError> {
    let model = config.model()?;
    let domain = config.domain()?;
    let mut reports = Vec::new();
    for radius in [domain.radius_m, domain.radius_mt] {
        let report = simplicity_check_radius(&model.metric, radius);
        if !report.is_simple() && !force {
            return Err(CliError::NotSimple(format!(
                "metric is not simple on the disk of radius {radius}: {}",
                report.describe_failure()
            )));
        }
        reports.push((radius, report));
    }
    Ok(reports)
}

/// Runs `command`, writing every artifact under `out`.
pub fn execute(
    command: &Command,
    config: &Config,
    out: &Path,
    force: bool,
) -> Result<(), CliError> {
    config.validate()?;
    let start = Instant::now();
    let simplicity = check_simplicity(config, force)?;
    let mut art = Artifacts::create(out)?;
    let canonical = config.canonical_json();
    art.write_bytes("config.json", format!("{canonical}\n").as_bytes())?;
    let records: Vec<Simplicity> = simplicity
        .into_iter()
        .map(|(radius, report)| Simplicity { radius, report })
        .collect();
    art.write_json("simplicity.json", &records)?;

    let mut ctx = Context { config, art };
    let verdict = match command {
        Command::Forward => ctx.forward(),
        Command::Adjoint { data } => ctx.adjoint(data.as_deref()),
        Command::SelftestAdjoint => ctx.checks(&[2]),
        Command::Transport => ctx.transport(),
        Command::Normal { method } => ctx.normal(*method),
        Command::Symbol => ctx.symbol(),
        Command::Ellipticity => ctx.ellipticity(),
        Command::Decompose => ctx.decompose(),
        Command::TraceRecover => ctx.trace_recover(),
        Command::GaugeNormalize => ctx.gauge_normalize(),
        Command::Reconstruct => ctx.reconstruct(),
        Command::Stability => ctx.stability(),
        Command::Perturb => ctx.perturb(),
        Command::Selftest => ctx.checks(&CRITERIA.map(|c| c.0)),
    };
    // Artifacts of a run that failed part-way still get a manifest.
    let failed = match verdict {
        Ok(failed) => failed,
        Err(e) => {
            ctx.art.finish(
                command.name(),
                &sha256_hex(canonical.as_bytes()),
                config.seed,
                start.elapsed().as_secs_f64(),
            )?;
            return Err(e);
        }
    };
    ctx.art.finish(
        command.name(),
        &sha256_hex(canonical.as_bytes()),
        config.seed,
        start.elapsed().as_secs_f64(),
    )?;
    if failed > 0 {
        return Err(CliError::ChecksFailed(failed));
    }
    Ok(())
}

/// Number of failed checks, zero for plain experiments.
type Verdict = Result<usize, CliError>;

struct Context<'c> {
    config: &'c Config,
    art: Artifacts,
}

impl Context<'_> {
    fn model(&self) -> Result<ModelPair, CliError> {
        self.config.model()
    }

    fn mesh(&self) -> Result<Arc<DiskMesh>, CliError> {
        Ok(Arc::new(DiskMesh::with_domain(
            self.config.mesh_spacing,
            self.config.domain()?,
        )?))
    }

    fn disc(&self) -> Result<Discretization, CliError> {
        Ok(Discretization::new(self.mesh()?, self.model()?))
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.config.seed)
    }

    fn phantom(&self, mesh: &Arc<DiskMesh>) -> Result<PairField, CliError> {
        let p = &self.config.phantom;
        Ok(match p.kind {
            PhantomKind::MetricPair => {
                PairField::metric_pair(mesh, Region::Inner, &self.model()?.metric)
            }
            PhantomKind::RandomSmooth => {
                random_smooth_pair(mesh, Region::Inner, &mut self.rng(), p.bumps, p.width)
            }
            PhantomKind::File => {
                let path = p
                    .path
                    .as_ref()
                    .ok_or_else(|| CliError::Config("phantom.path is missing".into()))?;
                let file = File::open(path)
                    .map_err(|e| CliError::Io(format!("cannot open {}: {e}", path.display())))?;
                read_field(mesh, Region::Inner, &PAIR_LABELS, BufReader::new(file))?
            }
        })
    }

    fn field<const N: usize>(
        &mut self,
        name: &str,
        f: &geotomo::mesh::Field<N>,
        labels: &[&str; N],
    ) -> Result<(), CliError> {
        self.art.write_with(name, |buf| write_field(f, labels, buf))
    }

    fn timed<T>(
        &mut self,
        stage: &str,
        f: impl FnOnce(&mut Self) -> Result<T, CliError>,
    ) -> Result<T, CliError> {
        let t = Instant::now();
        let out = f(self)?;
        self.art.record_stage(stage, t.elapsed().as_secs_f64());
        Ok(out)
    }

    fn forward(&mut self) -> Verdict {
        let mesh = self.mesh()?;
        let model = self.model()?;
        let f = self.phantom(&mesh)?;
        let plan = RayPlan::new(
            &model,
            &mesh,
            self.config.grid(Region::Inner)?,
            &self.config.trace(),
        )?;
        let data = self.timed("forward", |_| Ok(plan.apply(&f)?))?;
        self.art
            .write_with("nodes.csv", |b| write_nodes(&mesh, Region::Inner, b))?;
        self.art.write_with("triangles.csv", |b| {
            write_triangles(&mesh, Region::Inner, b)
        })?;
        self.field("phantom.csv", &f, &PAIR_LABELS)?;
        self.art.write_with("data.csv", |b| data.write_csv(b))?;
        Ok(0)
    }

    fn adjoint(&mut self, path: Option<&Path>) -> Verdict {
        let mesh = self.mesh()?;
        let model = self.model()?;
        let grid = self.config.grid(Region::Inner)?;
        let trace = self.config.trace();
        let data = match path {
            Some(p) => {
                let file = File::open(p)
                    .map_err(|e| CliError::Io(format!("cannot open {}: {e}", p.display())))?;
                FanBeamData::read_csv(BufReader::new(file), grid, &model.metric)?
            }
            None => RayPlan::new(&model, &mesh, grid, &trace)?.apply(&self.phantom(&mesh)?)?,
        };
        let plan = AdjointPlan::new(&model, &mesh, grid, self.config.n_dir, &trace)?;
        let out = self.timed("adjoint", |_| Ok(plan.apply(&data)?))?;
        self.field("adjoint.csv", &out, &PAIR_LABELS)?;
        #[derive(Serialize)]
        struct Summary {
            directions: usize,
            clipped_footpoints: usize,
        }
        self.art.write_json(
            "adjoint.json",
            &Summary {
                directions: plan.directions(),
                clipped_footpoints: plan.clipped(),
            },
        )?;
        Ok(0)
    }

    fn transport(&mut self) -> Verdict {
        let mesh = self.mesh()?;
        let model = self.model()?;
        let f = self.phantom(&mesh)?;
        let grid = self.config.grid(Region::Inner)?;
        let trace = self.config.trace();
        let mut rng = self.rng();
        let mut buf = Vec::new();
        writeln!(
            buf,
            "ray,beta,theta,transport_re,transport_im,integral_re,integral_im,relative_difference"
        )
        .map_err(io)?;
        let mut worst = 0.0f64;
        for r in 0..self.config.experiments.transport_rays {
            let beta = TAU * rng.random::<f64>();
            let theta = grid.theta_max() * (2.0 * rng.random::<f64>() - 1.0);
            let (x, v) = grid.ray(&model.metric, beta, theta);
            let u = transport_solve(&model, &f, &x, &v, &trace)?;
            let i = ray_integral(&model, &f, &x, &v, &trace)?;
            let rel = (u - i).norm() / i.norm().max(f64::MIN_POSITIVE);
            worst = worst.max(rel);
            writeln!(
                buf,
                "{r},{beta:.17e},{theta:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{rel:.17e}",
                u.re, u.im, i.re, i.im
            )
            .map_err(io)?;
        }
        self.art.write_bytes("transport.csv", &buf)?;
        self.art.write_json("transport.json", &serde_json::json!({ "rays": self.config.experiments.transport_rays, "max_relative_difference": worst }))?;
        Ok(0)
    }

    fn normal(&mut self, method: NormalMethod) -> Verdict {
        let mesh = self.mesh()?;
        let model = self.model()?;
        let r = self.config.domain()?.radius_m;
        let f = self.phantom(&mesh)?.map_nodes(|i, v| {
            let c = (1.0 - mesh.node(i).norm_squared() / (r * r))
                .max(0.0)
                .powi(2);
            v.map(|z| z * c)
        });
        let opts = self.config.normal();
        let out = self.timed("normal", |_| {
            Ok(match method {
                NormalMethod::Composed => ComposedNormal::new(&model, &mesh, &opts)?.apply(&f)?,
                NormalMethod::Direct => normal_apply_direct(&model, &f, &opts)?,
            })
        })?;
        self.field("input.csv", &f, &PAIR_LABELS)?;
        self.field("normal.csv", &out, &PAIR_LABELS)?;
        Ok(0)
    }

    fn symbol(&mut self) -> Verdict {
        let model = self.model()?;
        let domain = self.config.domain()?;
        let e = &self.config.experiments;
        let x = Vec2::new(e.symbol_point[0], e.symbol_point[1]);
        let xi = Vec2::new(e.symbol_covector[0], e.symbol_covector[1]);
        let s = principal_symbol(&model, domain.radius_mt, &x, &xi, &self.config.trace())?;
        #[derive(Serialize)]
        struct Record {
            x: [f64; 2],
            xi: [f64; 2],
            blocks: SymbolBlocks,
            eigenvalues: [f64; 5],
            min_restricted_eig: f64,
            oscillatory: Vec<OscillatoryReport>,
        }
        // The oscillatory comparison runs on the refined mesh, as in the suite.
        let h = self.config.mesh_spacing / 2.0;
        let mesh = Arc::new(DiskMesh::with_domain(h, domain)?);
        let w = Vec2::new(-xi[1], xi[0]) / xi.norm();
        let p0 = [w[0] * w[0], w[0] * w[1], w[1] * w[1], w[0], w[1]].map(|c| c64(c, 0.0));
        let opts = OscillatoryOptions::for_mesh_spacing(h);
        let oscillatory = e
            .frequencies
            .iter()
            .map(|&l| {
                Ok(symbol_oscillatory_test(
                    &model, &mesh, &x, &xi, l, &p0, &opts,
                )?)
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let record = Record {
            x: s.x,
            xi: s.xi,
            blocks: s.blocks(),
            eigenvalues: s.eigenvalues(),
            min_restricted_eig: s.min_restricted_eig(),
            oscillatory,
        };
        self.art.write_json("symbol.json", &[record])?;
        Ok(0)
    }

    fn ellipticity(&mut self) -> Verdict {
        let model = self.model()?;
        let domain = self.config.domain()?;
        let mut rng = self.rng();
        let samples: Vec<(Vec2, Vec2)> = (0..self.config.experiments.ellipticity_samples)
            .map(|_| {
                let (s, t) = (
                    0.95 * domain.radius_m * rng.random::<f64>().sqrt(),
                    TAU * rng.random::<f64>(),
                );
                let (m, u) = (0.5 + 1.5 * rng.random::<f64>(), TAU * rng.random::<f64>());
                (
                    Vec2::new(s * t.cos(), s * t.sin()),
                    Vec2::new(m * u.cos(), m * u.sin()),
                )
            })
            .collect();
        let report = ellipticity_check(&model, domain.radius_mt, &samples, &self.config.trace())?;
        let (x, xi) = samples.get(report.argmin).copied().unwrap_or_default();
        self.art.write_json(
            "ellipticity.json",
            &serde_json::json!({ "report": report, "argmin_x": [x[0], x[1]], "argmin_xi": [xi[0], xi[1]] }),
        )?;
        Ok(0)
    }

    fn decompose(&mut self) -> Verdict {
        let disc = self.disc()?;
        let f = self.phantom(disc.mesh())?;
        let split = self.timed("decompose", |_| {
            Ok(Projector::new(&disc, Region::Inner)?.project(&f)?)
        })?;
        self.field("solenoidal.csv", &split.solenoidal, &PAIR_LABELS)?;
        self.field("potential.csv", &(&f - &split.solenoidal), &PAIR_LABELS)?;
        self.field("generator.csv", &split.potential_generator, &COV_LABELS)?;
        self.art.write_json("residuals.json", &split.residuals)?;
        Ok(0)
    }

    fn trace_recover(&mut self) -> Verdict {
        let model = self.model()?;
        let h = self.config.mesh_spacing;
        let mesh = self.mesh()?;
        let r1 = mesh.domain().radius_m1;
        let g = PairField::from_fn(&mesh, Region::Middle, |x| {
            analytic_d_a(&model, x, vanishing_potential(x, r1)).map(|z| -z)
        });
        let rec = self.timed("recover", |_| {
            Ok(boundary_trace_recover(
                &model,
                &g,
                &RecoveryOptions::for_mesh_spacing(h),
            )?)
        })?;
        let mut buf = Vec::new();
        writeln!(buf, "node,x,y,w1_re,w1_im,w2_re,w2_im,phi_re,phi_im,exact_w1_re,exact_w1_im,exact_w2_re,exact_w2_im,exact_phi_re,exact_phi_im,directions").map_err(io)?;
        for ((&i, v), used) in rec.nodes.iter().zip(&rec.values).zip(&rec.directions_used) {
            let x = mesh.node(i);
            let exact = vanishing_potential(&x, r1).0;
            write!(buf, "{i},{:.17e},{:.17e}", x[0], x[1]).map_err(io)?;
            for z in v.iter().chain(&exact) {
                write!(buf, ",{:.17e},{:.17e}", z.re, z.im).map_err(io)?;
            }
            writeln!(buf, ",{used}").map_err(io)?;
        }
        self.art.write_bytes("trace.csv", &buf)?;
        let experiment = trace_experiment(&model, h)?;
        self.art.write_json(
            "trace.json",
            &serde_json::json!({ "recovery": rec, "experiment": experiment }),
        )?;
        Ok(0)
    }

    fn gauge_normalize(&mut self) -> Verdict {
        let disc = self.disc()?;
        let f = self.phantom(disc.mesh())?;
        let opts = GaugeOptions {
            collar: self.config.experiments.gauge_collar,
            ..GaugeOptions::default()
        };
        let r = self.timed("gauge", |_| Ok(boundary_gauge_normalize(&disc, &f, &opts)?))?;
        self.field("normalized.csv", &r.normalized, &PAIR_LABELS)?;
        self.field("generator.csv", &r.generator, &COV_LABELS)?;
        self.art.write_json("gauge.json", &r)?;
        Ok(0)
    }

    fn reconstruct(&mut self) -> Verdict {
        let disc = self.disc()?;
        let mesh = disc.mesh().clone();
        let model = self.model()?;
        let plan = RayPlan::new(
            &model,
            &mesh,
            self.config.grid(Region::Inner)?,
            &self.config.trace(),
        )?;
        let truth = Projector::new(&disc, Region::Inner)?.solenoidal(&self.phantom(&mesh)?)?;
        let data = plan.apply(&truth)?;
        let opts = self.config.recon();
        let (report, recovered) = self.timed("reconstruct", |_| {
            Ok(reconstruct_solenoidal(
                &disc,
                &plan,
                &data,
                Some(&truth),
                &opts,
            )?)
        })?;
        self.field("truth.csv", &truth, &PAIR_LABELS)?;
        self.field("recovered.csv", &recovered, &PAIR_LABELS)?;
        let mut buf = Vec::new();
        writeln!(buf, "iteration,residual,relative_error").map_err(io)?;
        for (k, (r, e)) in report
            .residual_history
            .iter()
            .zip(&report.error_history)
            .enumerate()
        {
            writeln!(buf, "{k},{r:.17e},{e:.17e}").map_err(io)?;
        }
        self.art.write_bytes("history.csv", &buf)?;
        self.art.write_json("report.json", &report)?;
        Ok(0)
    }

    fn stability(&mut self) -> Verdict {
        let disc = self.disc()?;
        let normal = ComposedNormal::new(&self.model()?, disc.mesh(), &self.config.normal())?;
        let n = self.config.experiments.stability_samples;
        let report = self.timed("stability", |c| {
            Ok(stability_ratio_experiment(
                &disc,
                &normal,
                n,
                c.config.seed,
            )?)
        })?;
        self.art.write_json("stability.json", &report)?;
        Ok(0)
    }

    fn perturb(&mut self) -> Verdict {
        let e = &self.config.experiments;
        let opts = PerturbationOptions {
            domain: self.config.domain()?,
            spacing: e.perturbation_spacing,
            probes: e.perturbation_probes,
            lanczos_steps: e.lanczos_steps,
            n_dir: self.config.n_dir,
            seed: self.config.seed,
            ..PerturbationOptions::default()
        };
        let model = self.model()?;
        let eps = e.perturbation_eps.clone();
        let report = self.timed("perturb", |_| {
            Ok(perturbation_study(
                &model,
                &PerturbationDirection::default(),
                &eps,
                &opts,
            )?)
        })?;
        self.art.write_json("perturbation.json", &report)?;
        Ok(0)
    }

    fn checks(&mut self, ids: &[u8]) -> Verdict {
        let mut outcomes: Vec<Outcome> = Vec::with_capacity(ids.len());
        for &id in ids {
            let outcome =
                self.timed(&format!("criterion {id}"), |c| Ok(suite::run(id, c.config)))?;
            println!("{}", outcome.summary());
            outcomes.push(outcome);
        }
        let failed = outcomes.iter().filter(|o| !o.passed).count();
        let text: String = outcomes.iter().map(|o| o.summary() + "\n").collect();
        self.art.write_bytes("selftest.txt", text.as_bytes())?;
        self.art.write_json(
            "selftest.json",
            &serde_json::json!({ "passed": failed == 0, "failed": failed, "criteria": outcomes }),
        )?;
        Ok(failed)
    }
}

fn io(e: std::io::Error) -> CliError {
    CliError::Io(e.to_string())
}
