//! One function per subcommand, each filling a [`RunReport`].

use std::f64::consts::PI;
use std::time::Instant;

use substatic_core::fields::test_field_catalog;
use substatic_core::geometry::audit_formulas;
use substatic_core::inequalities::{horizon_constant, horizon_term, validate_inner_boundary};
use substatic_core::quadrature::VolumeGrid;
use substatic_core::reilly::{evaluate_rearranged_form, inequality_form_slack};
use substatic_core::solver::{hk_proof_chain, minkowski_proof_chain, ProofChain};
use substatic_core::surfaces::{minkowski_identity, surface_geometry, Orientation};
use substatic_core::{
    af_almost_schur, evaluate_general_reilly, evaluate_weighted_reilly, first_eigenvalue,
    heintze_karcher, minkowski, BuiltinName, BvpKind, FieldExpr, GridSpec, InequalityReport,
    InnerBoundary, RadialBvp, RadialGraph, WarpedSpace,
};

use crate::config::{config_err, ExperimentConfig, ExperimentKind, GridConfig, SpaceConfig};
use crate::report::{RunReport, Status, Table, Verdict, VerdictKind};

/// Runs `kind` on `config`. A config naming a different experiment is a
/// config error.
pub fn run(config: &ExperimentConfig, kind: ExperimentKind) -> anyhow::Result<RunReport> {
    if let Some(k) = config.experiment {
        if k != kind {
            return Err(config_err(format!("config is for `{k}`, not `{kind}`")));
        }
    }
    let start = Instant::now();
    let mut report = RunReport::new(config.clone(), kind);
    match kind {
        ExperimentKind::VerifyReilly => verify_reilly(config, &mut report)?,
        ExperimentKind::CheckHk => check_hk(config, &mut report)?,
        ExperimentKind::CheckMinkowski => check_minkowski(config, &mut report)?,
        ExperimentKind::CheckAf => check_af(config, &mut report)?,
        ExperimentKind::Solve => solve(config, &mut report)?,
        ExperimentKind::Eig => eig(config, &mut report)?,
        ExperimentKind::AuditFormulas => audit(config, &mut report)?,
        ExperimentKind::Calibrate => calibrate(config, &mut report)?,
    }
    report.wall_time_s = start.elapsed().as_secs_f64();
    report.finish();
    Ok(report)
}

/// Config used when `calibrate` or `audit-formulas` is run without one.
pub fn default_config(kind: ExperimentKind) -> Option<ExperimentConfig> {
    let (name, builtin, grids) = match kind {
        ExperimentKind::Calibrate => (
            "calibrate",
            BuiltinName::Euclidean,
            GridConfig {
                radial: 24,
                polar: 24,
                azimuthal: 48,
                ..GridConfig::default()
            },
        ),
        ExperimentKind::AuditFormulas => (
            "audit-hemisphere",
            BuiltinName::Hemisphere,
            GridConfig::default(),
        ),
        _ => return None,
    };
    Some(ExperimentConfig {
        experiment: Some(kind),
        name: name.to_string(),
        space: SpaceConfig {
            builtin: Some(builtin),
            phi: None,
            n: 3,
            s_min: None,
            s_max: None,
            boundary: None,
            base: None,
            params: Default::default(),
        },
        domain: None,
        surface: None,
        field: None,
        grids,
        tolerances: Default::default(),
        output: None,
    })
}

/// Exit status for an error escaping [`run`].
pub fn error_status(err: &anyhow::Error) -> Status {
    use substatic_core::Error as E;
    if err.is::<crate::config::ConfigError>() || err.is::<std::io::Error>() {
        return Status::ConfigError;
    }
    match err.downcast_ref::<E>() {
        Some(
            E::Parse { .. }
            | E::UnknownSymbol(_)
            | E::InvalidParams(_)
            | E::OutOfDomain { .. }
            | E::NoHorizon(_)
            | E::Unsupported(_),
        ) => Status::ConfigError,
        _ => Status::NumericalFailure,
    }
}

fn rel(x: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        x.abs() / scale
    } else {
        x.abs()
    }
}

fn refinement_verdict(check: String, residuals: &[f64], cfg: &ExperimentConfig) -> Option<Verdict> {
    let (first, last) = (*residuals.first()?, *residuals.last()?);
    if residuals.len() < 2 {
        return None;
    }
    let t = &cfg.tolerances;
    // `last <= first / drop`, or already at roundoff
    Some(Verdict::at_most(
        check,
        last,
        (first / t.refinement_drop).max(t.roundoff_floor),
    ))
}

fn convergence_table(name: String) -> Table {
    let mut t = Table::new(
        name,
        &[
            "radial",
            "polar",
            "azimuthal",
            "lhs_volume",
            "rhs",
            "residual",
            "relative_residual",
        ],
    );
    t.plot = Some([0, 3, 6]);
    t
}

fn grid_row(g: GridSpec) -> [f64; 3] {
    [g.radial as f64, g.polar as f64, g.azimuthal as f64]
}

fn fields(
    cfg: &ExperimentConfig,
    space: &WarpedSpace,
    graph: &RadialGraph,
) -> anyhow::Result<Vec<(String, FieldExpr)>> {
    let fc = cfg.field.as_ref();
    match (
        fc.and_then(|f| f.expr.as_ref()),
        fc.and_then(|f| f.catalog.as_deref()),
    ) {
        (Some(src), None) => Ok(vec![("expr".to_string(), cfg.expr("field.expr", src)?)]),
        (None, name) => {
            let name = name.unwrap_or("height");
            // `radial-vanishing-outer` vanishes on a slice; on a graph it is just smooth
            let catalog = test_field_catalog(space, graph.slice_radius().unwrap_or(1.0));
            let picked: Vec<_> = catalog
                .into_iter()
                .filter(|c| name == "all" || c.name == name)
                .map(|c| (c.name, c.expr))
                .collect();
            if picked.is_empty() {
                return Err(config_err(format!(
                    "field.catalog: no catalog field `{name}`"
                )));
            }
            Ok(picked)
        }
        (Some(_), Some(_)) => Err(config_err("field: give `expr` or `catalog`, not both")),
    }
}

fn verify_reilly(cfg: &ExperimentConfig, report: &mut RunReport) -> anyhow::Result<()> {
    let space = cfg.build_space()?;
    let domain = cfg.domain(&space)?;
    let ladder = cfg.grids.ladder();
    let t = cfg.tolerances.clone();
    let general = cfg.field.as_ref().and_then(|f| f.p.clone());
    let weight = match cfg.field.as_ref().and_then(|f| f.weight.as_deref()) {
        Some(src) if general.is_some() => Some(cfg.expr("field.weight", src)?),
        Some(_) => {
            return Err(config_err(
                "field.weight needs field.p (the general formula)",
            ))
        }
        None => None,
    };
    for (name, f) in fields(cfg, &space, &domain.outer)? {
        let mut table = convergence_table(format!("convergence-{name}"));
        let mut residuals = Vec::new();
        if let Some(choice) = &general {
            let mut last = None;
            for &g in &ladder {
                let br = evaluate_general_reilly(&space, &domain, &f, weight.as_ref(), choice, g)?;
                let [r, p, a] = grid_row(g);
                table.push(vec![
                    r,
                    p,
                    a,
                    br.lhs_volume,
                    br.lhs_volume - br.residual,
                    br.residual,
                    br.relative_residual,
                ]);
                residuals.push(br.relative_residual);
                last = Some(br);
            }
            report.output(format!("ledger/{name}"), last.expect("ladder is non-empty"))?;
        } else {
            let mut last = None;
            for &g in &ladder {
                let br = evaluate_weighted_reilly(&space, &domain, &f, g)?;
                let [r, p, a] = grid_row(g);
                table.push(vec![
                    r,
                    p,
                    a,
                    br.lhs_volume,
                    br.rhs(),
                    br.residual,
                    br.relative_residual,
                ]);
                residuals.push(br.relative_residual);
                last = Some(br);
            }
            let br = last.expect("ladder is non-empty");
            let top = cfg.grids.spec();
            report.verdict(Verdict::at_most(
                format!("{name}/cauchy-schwarz-violations"),
                br.cauchy_schwarz.violations as f64,
                0.0,
            ));
            report.verdict(Verdict::new(
                format!("{name}/bulk-Q-nonnegative"),
                VerdictKind::Hypothesis,
                br.bulk_q / br.scale.max(f64::MIN_POSITIVE),
                crate::report::Comparison::AtLeast,
                -t.roundoff_floor,
            ));
            let ineq_form = inequality_form_slack(&space, &domain, &f, top)?;
            report.verdict(Verdict::at_most(
                format!("{name}/inequality-form-consistency"),
                rel(ineq_form.consistency, ineq_form.scale),
                t.identity,
            ));
            let rearranged = evaluate_rearranged_form(&space, &domain, &f, top)?;
            report.verdict(Verdict::at_most(
                format!("{name}/rearranged-form"),
                rearranged.relative_difference,
                t.identity,
            ));
            report.output(format!("ledger/{name}"), br)?;
            report.output(format!("inequality-form/{name}"), ineq_form)?;
            report.output(format!("rearranged-form/{name}"), rearranged)?;
        }
        let last = *residuals.last().expect("ladder is non-empty");
        report.verdict(Verdict::at_most(
            format!("{name}/relative-residual"),
            last,
            t.identity,
        ));
        if let Some(v) = refinement_verdict(format!("{name}/refinement"), &residuals, cfg) {
            report.verdict(v);
        }
        report.tables.push(table);
    }
    Ok(())
}

/// Hypothesis verdicts, then the margin: numerical when the hypotheses
/// hold, informational otherwise.
fn inequality_verdicts(
    prefix: &str,
    ineq: &InequalityReport,
    cfg: &ExperimentConfig,
    report: &mut RunReport,
) {
    for (key, c) in &ineq.hypothesis_checks {
        report.verdict(Verdict::flag(
            format!("{prefix}/hypothesis/{key}"),
            VerdictKind::Hypothesis,
            c.passed,
        ));
    }
    let v = Verdict::at_least(
        format!("{prefix}/margin"),
        ineq.margin,
        -cfg.tolerances.margin,
    );
    report.verdict(if ineq.hypotheses_hold() { v } else { v.info() });
}

fn enclosing_inner(cfg: &ExperimentConfig, space: &WarpedSpace) -> anyhow::Result<InnerBoundary> {
    let inner = cfg.inner_boundary(space)?;
    if let InnerBoundary::Slice { .. } = inner {
        return Err(config_err(
            "the inequalities are stated for the region enclosed from the center or the horizon",
        ));
    }
    Ok(inner)
}

fn horizon_verdicts(
    space: &WarpedSpace,
    cfg: &ExperimentConfig,
    report: &mut RunReport,
) -> anyhow::Result<()> {
    let b = validate_inner_boundary(space)?;
    let c = horizon_constant(space)?;
    let term = horizon_term(space)?;
    let t = &cfg.tolerances;
    report.verdict(Verdict::at_most(
        "horizon/constant-two-ways",
        rel(c.difference, c.c_l.abs()),
        t.quadrature,
    ));
    report.verdict(Verdict::at_most(
        "horizon/term-identity",
        rel(term.residual, term.term.abs()),
        t.quadrature,
    ));
    report.output("horizon/validation", b)?;
    report.output("horizon/constant", c)?;
    report.output("horizon/term", term)?;
    Ok(())
}

fn chain_verdicts(
    prefix: &str,
    chain: &ProofChain,
    cfg: &ExperimentConfig,
    report: &mut RunReport,
) -> anyhow::Result<()> {
    let t = &cfg.tolerances;
    report.verdict(Verdict::flag(
        format!("{prefix}/steps-hold"),
        VerdictKind::Numerical,
        chain.holds(t.equality),
    ));
    report.verdict(Verdict::at_most(
        format!("{prefix}/slice-equality"),
        rel(chain.max_abs_slack(), chain.scale),
        t.equality,
    ));
    report.output(prefix.to_string(), chain)?;
    Ok(())
}

/// Closed form shared by both sides on a slice `s = b`.
fn slice_closed_form(space: &WarpedSpace, b: f64, minkowski: bool) -> anyhow::Result<f64> {
    let n = space.n as i32;
    let area = space.base.volume;
    Ok(if minkowski {
        space.profile.phi(b)? * b.powi(2 * n - 2) * area * area
    } else {
        b.powi(n) * area
    })
}

fn check_hk(cfg: &ExperimentConfig, report: &mut RunReport) -> anyhow::Result<()> {
    let space = cfg.build_space()?;
    let inner = enclosing_inner(cfg, &space)?;
    let graph = cfg.graph()?;
    let horizon = inner == InnerBoundary::Horizon;
    let ineq = heintze_karcher(&space, &graph, horizon, cfg.grids.spec())?;
    inequality_verdicts("hk", &ineq, cfg, report);
    if horizon {
        horizon_verdicts(&space, cfg, report)?;
    }
    if let Some(b) = graph.slice_radius() {
        let t = &cfg.tolerances;
        let exact = slice_closed_form(&space, b, false)?;
        report.verdict(Verdict::at_most(
            "hk/slice-equality",
            ineq.margin.abs(),
            t.equality,
        ));
        report.verdict(Verdict::at_most(
            "hk/closed-form-lhs",
            rel(ineq.lhs - exact, exact),
            t.equality,
        ));
        report.verdict(Verdict::at_most(
            "hk/closed-form-rhs",
            rel(ineq.rhs - exact, exact),
            t.equality,
        ));
        let sol = RadialBvp::new(BvpKind::DirichletHk, inner, b)
            .with_mesh(cfg.grids.mesh)
            .solve(&space)?;
        chain_verdicts(
            "hk/proof-chain",
            &hk_proof_chain(&space, &sol)?,
            cfg,
            report,
        )?;
    }
    report.output("hk", ineq)?;
    Ok(())
}

fn check_minkowski(cfg: &ExperimentConfig, report: &mut RunReport) -> anyhow::Result<()> {
    let space = cfg.build_space()?;
    let inner = enclosing_inner(cfg, &space)?;
    let graph = cfg.graph()?;
    let horizon = inner == InnerBoundary::Horizon;
    let spec = cfg.grids.spec();
    let t = cfg.tolerances.clone();
    let ineq = minkowski(&space, &graph, horizon, spec)?;
    inequality_verdicts("minkowski", &ineq, cfg, report);
    let geo = surface_geometry(&space, &graph, Orientation::Outward, spec)?;
    let identity = minkowski_identity(&space, &geo)?;
    report.verdict(Verdict::at_most(
        "minkowski/identity",
        rel(identity.residual, identity.rhs.abs()),
        t.equality,
    ));
    report.output("minkowski-identity", identity)?;
    if horizon {
        horizon_verdicts(&space, cfg, report)?;
    }
    if let Some(b) = graph.slice_radius() {
        let exact = slice_closed_form(&space, b, true)?;
        report.verdict(Verdict::at_most(
            "minkowski/slice-equality",
            ineq.margin.abs(),
            t.equality,
        ));
        report.verdict(Verdict::at_most(
            "minkowski/closed-form-lhs",
            rel(ineq.lhs - exact, exact),
            t.equality,
        ));
        report.verdict(Verdict::at_most(
            "minkowski/closed-form-rhs",
            rel(ineq.rhs - exact, exact),
            t.equality,
        ));
        let kind = if horizon {
            BvpKind::NeumannHorizon
        } else {
            BvpKind::NeumannMinkowski
        };
        let sol = RadialBvp::new(kind, inner, b)
            .with_mesh(cfg.grids.mesh)
            .solve(&space)?;
        chain_verdicts(
            "minkowski/proof-chain",
            &minkowski_proof_chain(&space, &sol)?,
            cfg,
            report,
        )?;
    }
    report.output("minkowski", ineq)?;
    Ok(())
}

fn check_af(cfg: &ExperimentConfig, report: &mut RunReport) -> anyhow::Result<()> {
    let space = cfg.build_space()?;
    let graph = cfg.graph()?;
    let scale = cfg
        .field
        .as_ref()
        .and_then(|f| f.weight_scale)
        .unwrap_or(1.0);
    let af = af_almost_schur(&space, &graph, cfg.grids.spec(), scale)?;
    let t = &cfg.tolerances;
    inequality_verdicts("af1", &af.af1, cfg, report);
    let v = Verdict::at_least("af2/margin", af.af2.margin, -t.margin);
    report.verdict(if af.af2.hypotheses_hold() {
        v
    } else {
        v.info()
    });
    report.verdict(Verdict::at_most(
        "af/ge-wang-consistency",
        af.ge_wang_gap,
        t.consistency,
    ));
    let sf = cfg.surface()?;
    if sf.slice.is_some() || sf.sphere_center.is_some() {
        let s = af.af1.scale;
        report.verdict(Verdict::at_most(
            "af1/geodesic-sphere-lhs",
            rel(af.af1.lhs, s),
            t.equality,
        ));
        report.verdict(Verdict::at_most(
            "af1/geodesic-sphere-rhs",
            rel(af.af1.rhs, s),
            t.equality,
        ));
    }
    report.output("af", af)?;
    Ok(())
}

fn outer_slice(cfg: &ExperimentConfig) -> anyhow::Result<f64> {
    cfg.graph()?.slice_radius().ok_or_else(|| {
        config_err("the radial solvers need a slice outer boundary (`surface.slice`)")
    })
}

fn solve(cfg: &ExperimentConfig, report: &mut RunReport) -> anyhow::Result<()> {
    let space = cfg.build_space()?;
    let inner = cfg.inner_boundary(&space)?;
    let b = outer_slice(cfg)?;
    let kind = cfg
        .domain
        .as_ref()
        .and_then(|d| d.problem)
        .unwrap_or(BvpKind::DirichletHk);
    let sol = RadialBvp::new(kind, inner.clone(), b)
        .with_mesh(cfg.grids.mesh)
        .solve(&space)?;
    let t = cfg.tolerances.clone();
    let fx = &sol.flux;
    report.verdict(Verdict::at_most(
        "flux-identity",
        rel(fx.residual, fx.volume_integral.abs()),
        t.solver,
    ));
    report.verdict(Verdict::at_most(
        "boundary-conditions",
        sol.bc_residual,
        t.boundary_condition,
    ));
    if let Some(r) = sol.robin_residual {
        report.verdict(Verdict::at_most("robin-residual", r, t.solver).info());
    }
    if let Some(slope) = sol.horizon_slope {
        report.verdict(Verdict::at_most("horizon-slope", slope.abs(), t.solver).info());
    }
    let chain = match (kind, &inner) {
        (_, InnerBoundary::Slice { .. }) => None,
        (BvpKind::DirichletHk, _) => Some(("hk-proof-chain", hk_proof_chain(&space, &sol)?)),
        _ => Some((
            "minkowski-proof-chain",
            minkowski_proof_chain(&space, &sol)?,
        )),
    };
    if let Some((name, chain)) = chain {
        chain_verdicts(name, &chain, cfg, report)?;
    }
    let mut table = Table::new("solution", &["s", "f", "f_r"]);
    for k in 0..sol.s.len() {
        table.push(vec![sol.s[k], sol.f[k], sol.f_r[k]]);
    }
    report.tables.push(table);
    let mut summary = serde_json::to_value(&sol)?;
    if let Some(obj) = summary.as_object_mut() {
        // the mesh data lives in the `solution` table
        for key in ["s", "f", "f_r"] {
            obj.remove(key);
        }
    }
    report.output("solution", summary)?;
    Ok(())
}

fn eig(cfg: &ExperimentConfig, report: &mut RunReport) -> anyhow::Result<()> {
    let space = cfg.build_space()?;
    let inner = cfg.inner_boundary(&space)?;
    let b = outer_slice(cfg)?;
    let e = first_eigenvalue(&space, &inner, b, cfg.grids.mesh)?;
    let t = &cfg.tolerances;
    report.verdict(Verdict::new(
        "lambda1-positive",
        VerdictKind::Numerical,
        e.lambda1,
        crate::report::Comparison::Above,
        0.0,
    ));
    report.verdict(Verdict::flag(
        "eigenfunction-positive",
        VerdictKind::Numerical,
        e.positive,
    ));
    report.verdict(Verdict::at_most(
        "rayleigh-consistency",
        rel(e.rayleigh_discrete - e.lambda1, e.lambda1.abs()),
        t.consistency,
    ));
    let mut table = Table::new("eigenfunction", &["s", "f"]);
    for (s, f) in e.s.iter().zip(&e.eigenfunction) {
        table.push(vec![*s, *f]);
    }
    report.tables.push(table);
    report.output("lambda1", e.lambda1)?;
    report.output("rayleigh_discrete", e.rayleigh_discrete)?;
    report.output("rayleigh_interpolant", e.rayleigh_interpolant)?;
    report.output("iterations", e.iterations)?;
    Ok(())
}

fn audit(cfg: &ExperimentConfig, report: &mut RunReport) -> anyhow::Result<()> {
    let space = cfg.build_space()?;
    let a = audit_formulas(&space, cfg.grids.radial, cfg.tolerances.quadrature)?;
    // a disagreement is the finding, not a failure
    report.verdict(Verdict::flag(
        "displayed-Q-agrees",
        VerdictKind::Info,
        a.q_agrees,
    ));
    report.verdict(Verdict::flag(
        "displayed-Ricci-agrees",
        VerdictKind::Info,
        a.ricci_agrees,
    ));
    let mut table = Table::new(
        "audit",
        &["quantity", "s", "displayed", "derived", "difference"],
    );
    for r in &a.rows {
        let q = match r.quantity {
            substatic_core::geometry::AuditedQuantity::QTangential => 0.0,
            substatic_core::geometry::AuditedQuantity::RicciTangential => 1.0,
        };
        table.push(vec![
            q,
            r.s,
            r.displayed,
            r.derived,
            r.displayed - r.derived,
        ]);
    }
    report.tables.push(table);
    report.output("audit", a)?;
    Ok(())
}

fn calibrate(cfg: &ExperimentConfig, report: &mut RunReport) -> anyhow::Result<()> {
    let space = WarpedSpace::builtin(BuiltinName::Euclidean, 3, &Default::default(), None)?;
    let spec = cfg.grids.spec();
    let tol = cfg.tolerances.quadrature;
    let r = 2.0;
    let ball = VolumeGrid::new(&space, 0.0, r, spec)?;
    let sphere = surface_geometry(&space, &RadialGraph::slice(r), Orientation::Outward, spec)?;
    let unit = surface_geometry(&space, &RadialGraph::slice(1.0), Orientation::Outward, spec)?;
    let checks = [
        (
            "ball-volume",
            ball.integrate(|_| Ok(1.0))?,
            4.0 * PI * r.powi(3) / 3.0,
        ),
        (
            "ball-second-moment",
            ball.integrate(|p| Ok(p.s * p.s))?,
            4.0 * PI * r.powi(5) / 5.0,
        ),
        ("sphere-area", sphere.area()?, 4.0 * PI * r * r),
        (
            "unit-sphere-total-mean-curvature",
            unit.integrate(|nd| Ok(nd.mean_curvature))?,
            8.0 * PI,
        ),
    ];
    let mut table = Table::new("calibration", &["computed", "exact", "relative_error"]);
    for (name, computed, exact) in checks {
        let e = rel(computed - exact, exact);
        report.verdict(Verdict::at_most(name, e, tol));
        table.push(vec![computed, exact, e]);
    }
    report.tables.push(table);
    report.output("grid", spec)?;
    Ok(())
}
