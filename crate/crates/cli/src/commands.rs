//! One function per subcommand. Each writes its CSVs through `CommandRun`
//! (which feeds the manifest) and records threshold checks; the caller turns
//! recorded failures into exit code 4 under `--assert`.

use crate::manifest::{RunManifest, TimingEntry};
use interact_clark::{
    clark_integrand_multi, euler_solve, fd_directional_check, integrand_density_with_pairing,
    linear_attraction_closed_form, picard_solve, variational_solve, verify_example,
    verify_representation, BrownianPath, DiffusionFamily, DriftFamily, Error, Result, Scenario,
    StreamRole, TestFunction,
};
use std::path::PathBuf;
use std::time::Instant;

pub struct CommandRun {
    out_dir: PathBuf,
    manifest: RunManifest,
    failures: Vec<String>,
}

impl CommandRun {
    pub fn new(command: &str, scenario: &Scenario, out_dir: PathBuf) -> Self {
        CommandRun {
            out_dir,
            manifest: RunManifest {
                command: command.to_string(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                scenario_hash: scenario.hash().to_string(),
                base_seed: scenario.base_seed,
                outputs: Vec::new(),
                timings: Vec::new(),
            },
            failures: Vec::new(),
        }
    }

    fn timed<T>(&mut self, label: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.manifest.timings.push(TimingEntry {
            label: label.to_string(),
            millis: start.elapsed().as_millis(),
        });
        out
    }

    fn write_csv(
        &mut self,
        name: &str,
        header: &str,
        rows: impl IntoIterator<Item = String>,
    ) -> Result<()> {
        let mut text = String::with_capacity(1 << 16);
        text.push_str(header);
        text.push('\n');
        for row in rows {
            text.push_str(&row);
            text.push('\n');
        }
        let path = self.out_dir.join(name);
        std::fs::write(&path, text)
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
        self.manifest
            .record_output(&path)
            .map_err(|e| Error::Config(format!("cannot hash {}: {e}", path.display())))?;
        Ok(())
    }

    /// Record a documented-threshold check; failures become exit code 4
    /// under `--assert`.
    fn check(&mut self, ok: bool, what: impl std::fmt::Display) {
        if !ok {
            self.failures.push(what.to_string());
        }
    }

    pub fn failures(&self) -> &[String] {
        &self.failures
    }

    pub fn finish(&self) -> std::io::Result<PathBuf> {
        self.manifest.write(&self.out_dir)
    }
}

pub fn simulate(s: &Scenario, run: &mut CommandRun) -> Result<()> {
    let grid = s.grid;
    let path = BrownianPath::sample(grid, s.base_seed, StreamRole::Path, 0, 0, 0);
    let traj = run.timed("integrate", || euler_solve(&s.coefficients, &s.initial, &path))?;
    let states = traj.states();
    run.write_csv(
        "trajectory.csv",
        "t,particle_index,atom,weight,position",
        (0..=grid.n_steps()).flat_map(|k| {
            let st = &states[k];
            let t = grid.time(k);
            (0..st.n_particles())
                .map(move |i| {
                    format!("{t},{i},{},{},{}", st.atoms()[i], st.weights()[i], st.positions()[i])
                })
                .collect::<Vec<_>>()
        }),
    )?;

    match (s.coefficients.drift(), s.coefficients.diffusion_family()) {
        (DriftFamily::Zero, DiffusionFamily::Unit) => {
            let mut worst = 0.0f64;
            for k in 0..=grid.n_steps() {
                let w = path.value(k);
                for (x, u) in states[k].positions().iter().zip(s.initial.atoms()) {
                    worst = worst.max((x - u - w).abs());
                }
            }
            println!("translation deviation: {worst:e}");
            run.check(worst <= 1e-12, format!("translation deviation {worst:e} > 1e-12"));
        }
        (DriftFamily::LinearAttraction(kappa), DiffusionFamily::Unit) => {
            let m0 = s.initial.weighted_mean();
            let mut worst_mean = 0.0f64;
            let mut worst_particle = 0.0f64;
            for k in 0..=grid.n_steps() {
                let w = path.value(k);
                let t = grid.time(k);
                worst_mean = worst_mean.max((states[k].weighted_mean() - m0 - w).abs());
                for (x, &u) in states[k].positions().iter().zip(s.initial.atoms()) {
                    let exact = linear_attraction_closed_form(kappa, m0, u, t, w);
                    worst_particle = worst_particle.max((x - exact).abs());
                }
            }
            println!("mean transport deviation: {worst_mean:e}");
            println!("closed-form deviation: {worst_particle:e}");
            run.check(worst_mean <= 1e-10, format!("mean transport deviation {worst_mean:e} > 1e-10"));
        }
        _ => {}
    }
    Ok(())
}

pub fn picard_check(s: &Scenario, run: &mut CommandRun) -> Result<()> {
    let grid = s.grid;
    let path = BrownianPath::sample(grid, s.base_seed, StreamRole::Path, 0, 0, 0);
    let n_iter = s.knobs.picard_iters;
    let (iterated, deltas) =
        run.timed("iterate", || picard_solve(&s.coefficients, &s.initial, &path, n_iter))?;
    let euler = euler_solve(&s.coefficients, &s.initial, &path)?;
    let mut gap = 0.0f64;
    for k in 0..=grid.n_steps() {
        for (a, b) in iterated.state(k).positions().iter().zip(euler.state(k).positions()) {
            gap = gap.max((a - b).abs());
        }
    }
    run.write_csv(
        "picard.csv",
        "n,delta",
        deltas.iter().enumerate().map(|(i, d)| format!("{},{d}", i + 1)),
    )?;
    println!("fixed-point gap: {gap:e}");

    for n in 2..deltas.len().min(7) {
        // delta_n is deltas[n-1]; contraction wants delta_{n+1}/delta_n <= 1/2
        let (prev, next) = (deltas[n - 1], deltas[n]);
        if prev > 0.0 {
            let ratio = next / prev;
            run.check(
                ratio <= 0.5,
                format!("contraction ratio at n={n}: {ratio:.4} > 0.5"),
            );
        }
    }
    let last = *deltas.last().expect("at least one sweep");
    run.check(
        gap <= 10.0 * last + 1e-15,
        format!("gap {gap:e} exceeds 10x the last contraction step {last:e}"),
    );
    Ok(())
}

pub fn malliavin_check(s: &Scenario, run: &mut CommandRun) -> Result<()> {
    let grid = s.grid;
    let n = grid.n_steps();
    let path = BrownianPath::sample(grid, s.base_seed, StreamRole::Path, 0, 0, 0);
    let traj = euler_solve(&s.coefficients, &s.initial, &path)?;

    let mut launches = vec![0, n / 4, n / 2, 3 * n / 4];
    launches.dedup();
    let mut rows = Vec::new();
    for &s_idx in &launches {
        let field = variational_solve(&s.coefficients, &traj, &path, s_idx)?;
        let t_launch = grid.time(s_idx);
        for k in s_idx..=n {
            let values = field.at(k)?;
            let t = grid.time(k);
            for (i, eta) in values.iter().enumerate() {
                rows.push(format!("{t_launch},{t},{i},{eta}"));
            }
        }
    }
    run.write_csv("eta.csv", "s,t,particle_index,eta", rows)?;

    let h: Vec<f64> = (0..n)
        .map(|m| if grid.time(m) >= 0.25 - 1e-12 { 1.0 } else { 0.0 })
        .collect();
    let fd = run.timed("fd_check", || {
        fd_directional_check(&s.coefficients, &s.initial, &path, &h, s.knobs.fd_epsilon)
    })?;
    println!("fd max relative error: {fd:e}");
    run.check(fd <= 1e-3, format!("directional derivative vs finite difference: {fd:e} > 1e-3"));
    Ok(())
}

pub fn clark_verify(s: &Scenario, run: &mut CommandRun) -> Result<()> {
    let grid = s.grid;
    let k = &s.knobs;
    let path0 = BrownianPath::sample(grid, s.base_seed, StreamRole::Outer, 0, 0, 0);
    let estimates = run.timed("integrand_path0", || {
        clark_integrand_multi(
            &s.coefficients,
            &s.initial,
            &s.test_functions,
            &path0,
            k.n_inner,
            s.base_seed,
            0,
        )
    })?;
    for est in &estimates {
        run.write_csv(
            &format!("theta_{}.csv", est.f().name()),
            "t,theta_hat,stderr",
            (0..=grid.n_steps())
                .map(|j| format!("{},{},{}", grid.time(j), est.estimate(j), est.stderr(j))),
        )?;
    }
    for &f in &s.test_functions {
        let report = run.timed(&format!("verify_{}", f.name()), || {
            verify_representation(
                &s.coefficients,
                &s.initial,
                f,
                grid,
                k.m_outer,
                k.m_mean,
                k.n_inner,
                s.base_seed,
            )
        })?;
        run.write_csv(
            &format!("clark_summary_{}.csv", f.name()),
            "M_outer,M_mean,n_inner,n_steps,mean_resid,stderr_mean_resid,rms_resid",
            [format!(
                "{},{},{},{},{},{},{}",
                report.m_outer,
                report.m_mean,
                report.n_inner,
                report.n_steps,
                report.mean_residual,
                report.stderr_mean_residual,
                report.rms_residual
            )],
        )?;
        println!(
            "{}: mean residual {:e} (combined stderr {:e}), rms {:e}",
            f.name(),
            report.mean_residual,
            report.combined_stderr(),
            report.rms_residual
        );
        run.check(
            report.mean_residual.abs() <= 3.0 * report.combined_stderr(),
            format!(
                "{}: |mean residual| {:e} > 3x combined stderr {:e}",
                f.name(),
                report.mean_residual.abs(),
                report.combined_stderr()
            ),
        );
    }
    Ok(())
}

pub fn delta_example(s: &Scenario, run: &mut CommandRun) -> Result<()> {
    let mut rows = Vec::with_capacity(s.test_functions.len());
    for &f in &s.test_functions {
        let summary = run.timed(&format!("example_{}", f.name()), || {
            verify_example(f, s.grid, s.knobs.m_paths, s.base_seed, s.knobs.n_nodes)
        })?;
        rows.push(format!(
            "{},{},{},{},{},{},{}",
            f.name(),
            summary.n_steps,
            summary.m_paths,
            summary.mean_residual,
            summary.stderr,
            summary.rms_residual,
            summary.ibp_check
        ));
        println!(
            "{}: mean residual {:e}, rms {:e}, smoothing-forms gap {:e}",
            f.name(),
            summary.mean_residual,
            summary.rms_residual,
            summary.ibp_check
        );
        run.check(
            summary.ibp_check <= 1e-8,
            format!("{}: smoothing forms disagree by {:e} > 1e-8", f.name(), summary.ibp_check),
        );
        run.check(
            summary.mean_residual.abs() <= 3.0 * summary.stderr + 1e-12,
            format!(
                "{}: |mean residual| {:e} > 3x stderr {:e}",
                f.name(),
                summary.mean_residual.abs(),
                summary.stderr
            ),
        );
        if matches!(f, TestFunction::Identity | TestFunction::One) {
            run.check(
                summary.rms_residual <= 1e-12,
                format!("{}: rms residual {:e} > 1e-12", f.name(), summary.rms_residual),
            );
        }
    }
    run.write_csv(
        "delta_summary.csv",
        "f_name,n_steps,M,mean_resid,stderr,rms_resid,ibp_check",
        rows,
    )?;
    Ok(())
}

pub fn density(s: &Scenario, run: &mut CommandRun) -> Result<()> {
    let grid = s.grid;
    let k_idx = grid
        .index_of(s.knobs.t_probe)
        .ok_or_else(|| Error::Config("knobs.t_probe must sit on a grid point".into()))?;
    let path0 = BrownianPath::sample(grid, s.base_seed, StreamRole::Outer, 0, 0, 0);
    let traj = euler_solve(&s.coefficients, &s.initial, &path0)?;
    let state = traj.state(k_idx);
    let (est, checks) = run.timed("estimate", || {
        integrand_density_with_pairing(
            &s.coefficients,
            state,
            &grid,
            &s.test_functions,
            s.knobs.n_inner,
            s.knobs.bandwidth,
            s.knobs.density_grid_points,
            s.base_seed,
            0,
        )
    })?;
    let t = est.t();
    run.write_csv(
        "density.csv",
        "t,v,g_hat",
        est.grid_points()
            .iter()
            .zip(est.values())
            .map(|(v, g)| format!("{t},{v},{g}")),
    )?;
    run.write_csv(
        "density_pairing.csv",
        "phi_name,theta_hat,pairing,rel_error",
        checks.iter().map(|c| {
            format!("{},{},{},{}", c.f.name(), c.theta_hat, c.pairing, c.rel_error)
        }),
    )?;
    let total = est.pair_trapezoid(TestFunction::One);
    println!("bandwidth: {}, total integral: {total:e}", est.bandwidth());
    run.check(
        total.abs() <= 0.01,
        format!("total integral of the signed density {total:e} exceeds 0.01"),
    );
    for c in &checks {
        println!(
            "{}: theta_hat {:.6}, pairing {:.6}, rel error {:.4}",
            c.f.name(),
            c.theta_hat,
            c.pairing,
            c.rel_error
        );
        run.check(
            c.rel_error <= 0.1,
            format!("{}: pairing relative error {:.4} > 0.1", c.f.name(), c.rel_error),
        );
    }
    Ok(())
}
