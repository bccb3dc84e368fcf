use nalgebra::Vector3;
use num_complex::Complex64;
use serde::Serialize;
use shellspec_core::diagnostics::{
    cauchy_coupling_identities, compactness_profile, confinement_check, magnetic_inverse_check, CauchyIdentityReport, ConfinementReport,
    DecayProfile, MagneticInverseReport, TAIL_INDICES,
};
use shellspec_core::gamma::{classify, Classification};
use shellspec_core::krein::{krein_pde_residual, KreinSolver};
use shellspec_core::operators::identities::{fitted_order, identity_suite, observed_orders, IdentityReport};
use shellspec_core::spectral::{
    chebyshev_samples, check_scannable, determinant_sweep, mapped_coupling, scan, set_distance, spectral_correspondence, CorrespondenceReport,
    DeterminantSweep, GapProblem, SpectralScan,
};
use shellspec_core::{build_quadrature, Coupling, Discretization, GeometrySpec, SpectralParam};

use crate::config::{ConvergeQuantity, RunConfig};
use crate::error::CliError;
use crate::report::{markdown_table, sci, Run, Verdict};

fn discretize(run: &mut Run, cfg: &RunConfig, spec: &GeometrySpec, label: &str) -> Result<Discretization, CliError> {
    Ok(run.time(format!("assemble {label}"), || Discretization::new(spec, &cfg.near_field))?)
}

fn identity_rows(report: &IdentityReport) -> Vec<Vec<String>> {
    report
        .checks
        .iter()
        .map(|c| {
            let op = if c.bound == shellspec_core::operators::identities::Bound::Upper {
                "<="
            } else {
                ">="
            };
            vec![
                c.name.clone(),
                sci(c.value),
                format!("{op} {}", sci(c.threshold)),
                if c.refining { "quadrature" } else { "kernel" }.into(),
                if c.passed() { "pass" } else { "FAIL" }.into(),
            ]
        })
        .collect()
}

#[derive(Serialize)]
struct OrderRow {
    name: String,
    values: Vec<f64>,
    orders: Vec<f64>,
    fitted: f64,
}

fn refining_orders(reports: &[IdentityReport]) -> Vec<OrderRow> {
    let hs: Vec<f64> = reports.iter().map(|r| r.h).collect();
    reports[0]
        .checks
        .iter()
        .filter(|c| c.refining)
        .map(|c| {
            let values: Vec<f64> = reports.iter().map(|r| r.get(&c.name).map_or(f64::NAN, |x| x.value)).collect();
            OrderRow {
                name: c.name.clone(),
                orders: observed_orders(&hs, &values),
                fitted: fitted_order(&hs, &values),
                values,
            }
        })
        .collect()
}

pub fn identities(cfg: &RunConfig, run: &mut Run) -> Result<Verdict, CliError> {
    let opts = cfg.identity_options();
    let mut specs = vec![cfg.geometry.clone()];
    if cfg.identities.refine {
        specs.push(cfg.geometry.refined(2));
    }
    let mut reports = Vec::new();
    for (k, spec) in specs.iter().enumerate() {
        let disc = discretize(run, cfg, spec, &format!("x{}", 1 << k))?;
        if k == 0 && cfg.output.dump_operators {
            let energy = opts.energies.first().copied().unwrap_or(0.0);
            let c = disc.cauchy(&SpectralParam::gap(energy, cfg.mass)?);
            run.dump("cauchy.bin", &c)?;
        }
        let report = run.time(format!("identity suite N={}", disc.nodes()), || identity_suite(&disc, &opts))?;
        reports.push(report);
    }

    let mut verdict = Verdict::default();
    for r in &reports {
        for c in r.failures() {
            verdict
                .failures
                .push(format!("{} = {:.3e} at N={} (threshold {:.1e})", c.name, c.value, r.nodes, c.threshold));
        }
    }
    let orders = if reports.len() > 1 { refining_orders(&reports) } else { Vec::new() };

    #[derive(Serialize)]
    struct Out<'a> {
        geometry: &'a GeometrySpec,
        reports: &'a [IdentityReport],
        orders: &'a [OrderRow],
        passed: bool,
    }
    run.json(
        "identities.json",
        &Out {
            geometry: &cfg.geometry,
            reports: &reports,
            orders: &orders,
            passed: verdict.passed(),
        },
    )?;

    let mut csv = String::from("nodes,h,name,value,threshold,refining,passed\n");
    for r in &reports {
        for c in &r.checks {
            csv.push_str(&format!(
                "{},{:.6e},{},{:.12e},{:.3e},{},{}\n",
                r.nodes,
                r.h,
                c.name,
                c.value,
                c.threshold,
                c.refining,
                c.passed()
            ));
        }
    }
    run.write("identities.csv", &csv)?;

    let mut md = String::from("# Identity suite\n\n");
    for r in &reports {
        md.push_str(&format!("## N = {} (h = {:.4})\n\n", r.nodes, r.h));
        if r.lower_order_fallback {
            md.push_str("Mesh input: principal values use the lower-order flat-panel fallback.\n\n");
        }
        md.push_str(&markdown_table(&["check", "value", "threshold", "kind", "result"], &identity_rows(r)));
        md.push('\n');
    }
    if !orders.is_empty() {
        md.push_str("## Observed orders\n\n");
        let rows: Vec<Vec<String>> = orders
            .iter()
            .map(|o| vec![o.name.clone(), sci(o.values[0]), sci(o.values[1]), format!("{:.2}", o.fitted)])
            .collect();
        md.push_str(&markdown_table(&["check", "coarse", "fine", "order"], &rows));
    }
    run.write("identities.md", &md)?;
    for r in &reports {
        println!(
            "identities N={}: {} of {} checks pass",
            r.nodes,
            r.checks.len() - r.failures().len(),
            r.checks.len()
        );
    }
    Ok(verdict)
}

fn classification_note(c: &Coupling) -> Option<(Classification, String)> {
    let cls = classify(c).ok()?;
    let note = if cls.confining {
        "confining coupling: the shell decouples the inside from the outside".to_string()
    } else {
        "non-confining coupling".to_string()
    };
    Some((cls, note))
}

pub fn spectrum(cfg: &RunConfig, run: &mut Run) -> Result<Verdict, CliError> {
    check_scannable(&cfg.coupling)?;
    let opts = cfg.scan_options();
    let disc = discretize(run, cfg, &cfg.geometry, "x1")?;
    let problem = GapProblem::new(&disc, cfg.coupling, cfg.mass, opts.subspace)?;
    let result = run.time("scan", || scan(&problem, &opts))?;
    let mut verdict = Verdict::default();

    let mut sweep: Option<DeterminantSweep> = None;
    if cfg.spectrum.sweep_samples > 0 {
        let grid = chebyshev_samples(cfg.spectrum.sweep_samples, cfg.spectrum.edge, cfg.mass);
        let s = run.time("determinant sweep", || determinant_sweep(&problem, &grid))?;
        let gap = set_distance(&s.roots, &result.root_energies());
        verdict.check(gap <= cfg.spectrum.sweep_tol * cfg.mass, || {
            format!("determinant sweep roots differ from the scan by {gap:.3e}")
        });
        sweep = Some(s);
    }

    let mut correspondence: Option<(Coupling, SpectralScan, CorrespondenceReport)> = None;
    if cfg.spectrum.correspondence {
        let mapped = mapped_coupling(&cfg.coupling).ok().filter(|m| check_scannable(m).is_ok());
        if let Some(mapped) = mapped {
            let mp = GapProblem::new(&disc, mapped, cfg.mass, opts.subspace)?;
            let ms = run.time("scan mapped coupling", || scan(&mp, &opts))?;
            let report = spectral_correspondence(&result, &ms, cfg.spectrum.correspondence_tol * cfg.mass);
            verdict.check(report.supported == "same" || report.supported == "both", || {
                format!(
                    "mapped coupling roots differ by {:.3e} (tolerance {:.1e})",
                    report.same_energy, report.tolerance
                )
            });
            correspondence = Some((mapped, ms, report));
        }
    }
    let note = classification_note(&cfg.coupling);

    #[derive(Serialize)]
    struct Out<'a> {
        scan: &'a SpectralScan,
        classification: Option<&'a Classification>,
        note: Option<&'a str>,
        sweep: Option<&'a DeterminantSweep>,
        mapped_coupling: Option<&'a Coupling>,
        mapped_roots: Option<Vec<f64>>,
        correspondence: Option<&'a CorrespondenceReport>,
    }
    run.json(
        "spectrum.json",
        &Out {
            scan: &result,
            classification: note.as_ref().map(|n| &n.0),
            note: note.as_ref().map(|n| n.1.as_str()),
            sweep: sweep.as_ref(),
            mapped_coupling: correspondence.as_ref().map(|c| &c.0),
            mapped_roots: correspondence.as_ref().map(|c| c.1.root_energies()),
            correspondence: correspondence.as_ref().map(|c| &c.2),
        },
    )?;
    run.write("spectrum.csv", &result.to_csv())?;

    let mut md = format!(
        "# Gap spectrum\n\ncoupling: `{:?}`, m = {}, N = {}, subspace dimension {}\n\n",
        cfg.coupling, cfg.mass, result.nodes, result.subspace_dim
    );
    if let Some((_, n)) = &note {
        md.push_str(&format!("{n}\n\n"));
    }
    let rows: Vec<Vec<String>> = result
        .roots
        .iter()
        .map(|r| vec![format!("{:.8}", r.a), r.multiplicity.to_string(), sci(r.residual), sci(r.branch_value)])
        .collect();
    if rows.is_empty() {
        md.push_str("No eigenvalues in the gap.\n");
    } else {
        md.push_str(&markdown_table(&["energy", "multiplicity", "residual", "branch value"], &rows));
    }
    if let Some((mapped, ms, report)) = &correspondence {
        md.push_str(&format!(
            "\n## Mapped coupling\n\n`{mapped:?}`: roots {:?}\n\nsame-energy distance {}, reflected-energy distance {}, supported: {}\n",
            ms.root_energies(),
            sci(report.same_energy),
            sci(report.reflected_energy),
            report.supported
        ));
    }
    if let Some(s) = &sweep {
        md.push_str(&format!("\n## Determinant sweep\n\nroots {:?}\n", s.roots));
    }
    run.write("spectrum.md", &md)?;
    println!("spectrum: {} roots {:?}", result.roots.len(), result.root_energies());
    Ok(verdict)
}

pub fn resolvent(cfg: &RunConfig, run: &mut Run) -> Result<Verdict, CliError> {
    let r = &cfg.resolvent;
    let opts = cfg.krein_options();
    let p = SpectralParam::new(Complex64::new(r.z[0], r.z[1]), cfg.mass)?;
    let disc = discretize(run, cfg, &cfg.geometry, "x1")?;
    let solver = run.time("factor", || KreinSolver::new(&disc, cfg.coupling, p, &opts))?;
    if cfg.output.dump_operators {
        run.dump("coupled.bin", &solver.coupled)?;
    }
    let out = run.time("evaluate", || solver.apply(&r.source, &r.points, &opts))?;
    let boundary = solver.boundary_condition_defect(&r.source, &opts)?;
    let pde = run.time("pde residuals", || {
        r.points
            .iter()
            .map(|x| krein_pde_residual(&solver, &r.source, x, r.fd_step))
            .collect::<Result<Vec<_>, _>>()
    })?;

    let mut verdict = Verdict::default();
    verdict.check(boundary <= r.boundary_tol, || {
        format!("boundary condition defect {boundary:.3e} above {:.1e}", r.boundary_tol)
    });
    for (x, d) in r.points.iter().zip(&pde) {
        verdict.check(*d <= r.pde_tol, || {
            format!("pde residual {d:.3e} at {:?} above {:.1e}", x.as_slice(), r.pde_tol)
        });
    }

    #[derive(Serialize)]
    struct Out<'a> {
        z: [f64; 2],
        mass: f64,
        coupling: &'a Coupling,
        nodes: usize,
        inverse_condition: f64,
        solve_residual: f64,
        boundary_condition_defect: f64,
        pde_residuals: &'a [f64],
        points: &'a [Vector3<f64>],
        values: &'a [shellspec_core::operators::Spinor],
        free: &'a [shellspec_core::operators::Spinor],
    }
    run.json(
        "resolvent.json",
        &Out {
            z: r.z,
            mass: cfg.mass,
            coupling: &cfg.coupling,
            nodes: disc.nodes(),
            inverse_condition: out.inverse_condition,
            solve_residual: out.solve_residual,
            boundary_condition_defect: boundary,
            pde_residuals: &pde,
            points: &out.points,
            values: &out.values,
            free: &out.free,
        },
    )?;
    let mut csv = String::from("point,x,y,z,component,re,im,free_re,free_im\n");
    for (k, (x, (v, f))) in out.points.iter().zip(out.values.iter().zip(&out.free)).enumerate() {
        for c in 0..4 {
            csv.push_str(&format!(
                "{k},{},{},{},{c},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                x[0], x[1], x[2], v[c].re, v[c].im, f[c].re, f[c].im
            ));
        }
    }
    run.write("resolvent.csv", &csv)?;
    let rows: Vec<Vec<String>> = out
        .points
        .iter()
        .zip(&pde)
        .map(|(x, d)| vec![format!("({:.3}, {:.3}, {:.3})", x[0], x[1], x[2]), sci(*d)])
        .collect();
    let md = format!(
        "# Resolvent\n\nz = {} + {}i, coupling `{:?}`, N = {}\n\nconditioning ratio {}, solve residual {}, boundary condition defect {}\n\n{}",
        r.z[0],
        r.z[1],
        cfg.coupling,
        disc.nodes(),
        sci(out.inverse_condition),
        sci(out.solve_residual),
        sci(boundary),
        markdown_table(&["point", "pde residual"], &rows)
    );
    run.write("resolvent.md", &md)?;
    println!(
        "resolvent: boundary defect {boundary:.2e}, max pde residual {:.2e}",
        pde.iter().cloned().fold(0.0, f64::max)
    );
    Ok(verdict)
}

#[derive(Serialize)]
struct ProfileEntry {
    geometry: String,
    profile: DecayProfile,
    /// Relative change of the leading values against the coarse grid.
    leading_change: Option<f64>,
}

pub fn diagnostics(cfg: &RunConfig, run: &mut Run) -> Result<Verdict, CliError> {
    let d = &cfg.diagnostics;
    let popts = cfg.profile_options();
    let mut verdict = Verdict::default();
    let mut geoms: Vec<(String, GeometrySpec)> = vec![("main".into(), cfg.geometry.clone())];
    if let Some(shape) = &d.compare {
        geoms.push((
            "compare".into(),
            GeometrySpec {
                shape: shape.clone(),
                ..cfg.geometry.clone()
            },
        ));
    }

    let mut profiles: Vec<ProfileEntry> = Vec::new();
    for (label, spec) in &geoms {
        let disc = discretize(run, cfg, spec, label)?;
        let fine = if d.stability {
            Some(discretize(run, cfg, &spec.refined(2), &format!("{label} x2"))?)
        } else {
            None
        };
        for which in &d.operators {
            let p = run.time(format!("profile {} {label}", which.label()), || {
                compactness_profile(&disc, *which, &popts)
            })?;
            let mut leading_change = None;
            if let Some(fine) = &fine {
                let pf = run.time(format!("profile {} {label} x2", which.label()), || {
                    compactness_profile(fine, *which, &popts)
                })?;
                let change = pf.leading_change(&p, d.stability_count);
                verdict.check(change <= d.stability_tol, || {
                    format!("{} on {label}: leading singular values move by {change:.3e} under refinement", p.label)
                });
                leading_change = Some(change);
                profiles.push(ProfileEntry {
                    geometry: format!("{label} x2"),
                    profile: pf,
                    leading_change: None,
                });
            }
            profiles.insert(
                profiles.len() - usize::from(fine.is_some()),
                ProfileEntry {
                    geometry: label.clone(),
                    profile: p,
                    leading_change,
                },
            );
        }
    }

    let disc = discretize(run, cfg, &cfg.geometry, "x1 identities")?;
    let confinement: Option<ConfinementReport> = if d.confinement && cfg.coupling.is_local() {
        Some(run.time("confinement", || confinement_check(&disc, &cfg.coupling, &cfg.confinement_options()))?)
    } else {
        None
    };
    let mut cauchy: Vec<CauchyIdentityReport> = Vec::new();
    for &energy in &d.cauchy_energies {
        let r = run.time(format!("cauchy coupling a={energy}"), || {
            cauchy_coupling_identities(&disc, energy, cfg.mass, &cfg.cauchy_options())
        })?;
        let proj = r.projector_defects.iter().cloned().fold(0.0, f64::max);
        verdict.check(r.factorization_defect <= d.tol, || {
            format!("cauchy factorization defect {:.3e} at a={energy}", r.factorization_defect)
        });
        verdict.check(proj <= d.tol, || format!("cauchy projector defect {proj:.3e} at a={energy}"));
        verdict.check(r.sandwiched_at_zero == 0.0, || {
            format!("sandwiched operator at zero weight is {:.3e}", r.sandwiched_at_zero)
        });
        cauchy.push(r);
    }
    let mut magnetic: Vec<MagneticInverseReport> = Vec::new();
    let p = SpectralParam::gap(d.magnetic_energy, cfg.mass)?;
    for &strength in &d.magnetic {
        let r = run.time(format!("magnetic inverse {strength}"), || {
            magnetic_inverse_check(&disc, strength, &p, &cfg.cauchy_options())
        })?;
        let rel = (r.product_scalar - r.expected_scalar).abs() / r.expected_scalar;
        verdict.check(rel <= d.tol, || {
            format!("magnetic {strength}: product scalar {:.4} vs {:.4}", r.product_scalar, r.expected_scalar)
        });
        magnetic.push(r);
    }

    #[derive(Serialize)]
    struct Out<'a> {
        profiles: &'a [ProfileEntry],
        confinement: Option<&'a ConfinementReport>,
        cauchy: &'a [CauchyIdentityReport],
        magnetic: &'a [MagneticInverseReport],
    }
    run.json(
        "diagnostics.json",
        &Out {
            profiles: &profiles,
            confinement: confinement.as_ref(),
            cauchy: &cauchy,
            magnetic: &magnetic,
        },
    )?;
    for (k, e) in profiles.iter().enumerate() {
        run.write(&format!("profile_{k}.csv"), &e.profile.to_csv())?;
    }

    let mut header = vec!["operator", "geometry", "N", "sigma_1"];
    let tails: Vec<String> = TAIL_INDICES.iter().map(|k| format!("sigma_{k}/sigma_1")).collect();
    header.extend(tails.iter().map(String::as_str));
    header.push("leading change");
    let rows: Vec<Vec<String>> = profiles
        .iter()
        .map(|e| {
            let mut row = vec![
                e.profile.label.clone(),
                e.geometry.clone(),
                e.profile.nodes.to_string(),
                sci(e.profile.singular_values[0]),
            ];
            row.extend(
                TAIL_INDICES
                    .iter()
                    .map(|&k| e.profile.tail_ratio(k).map_or("-".into(), |v| format!("{v:.4}"))),
            );
            row.push(e.leading_change.map_or("-".into(), sci));
            row
        })
        .collect();
    let mut md = format!("# Diagnostics\n\n## Singular value profiles\n\n{}\n", markdown_table(&header, &rows));
    for (label, spec) in &geoms {
        md.push_str(&format!("- {label}: `{:?}`\n", spec.shape));
    }
    if let Some(c) = &confinement {
        md.push_str(&format!(
            "\n## Confinement\n\nsign scalar {}, projector defect {}, intertwines {}, confining {}\n",
            c.sign,
            sci(c.projector_defect),
            c.intertwines,
            c.confining
        ));
    }
    let rows: Vec<Vec<String>> = cauchy
        .iter()
        .map(|r| {
            vec![
                r.energy.to_string(),
                sci(r.factorization_defect),
                sci(r.sigma_min),
                sci(r.sigma_min_bound),
                sci(r.sandwiched_at_zero),
            ]
        })
        .collect();
    md.push_str(&format!(
        "\n## Cauchy couplings\n\n{}",
        markdown_table(&["energy", "factorization", "sigma_min", "bound", "sandwiched at zero"], &rows)
    ));
    let rows: Vec<Vec<String>> = magnetic
        .iter()
        .map(|r| {
            vec![
                r.magnetic.to_string(),
                format!("{:.5}", r.product_scalar),
                format!("{:.5}", r.expected_scalar),
                r.selected.clone(),
            ]
        })
        .collect();
    md.push_str(&format!(
        "\n## Magnetic inverse\n\n{}",
        markdown_table(&["strength", "product", "expected", "prefactor"], &rows)
    ));
    run.write("diagnostics.md", &md)?;
    for e in &profiles {
        println!(
            "diagnostics: {} on {} N={}: sigma_1 {:.4e}",
            e.profile.label, e.geometry, e.profile.nodes, e.profile.singular_values[0]
        );
    }
    Ok(verdict)
}

#[derive(Serialize)]
struct ConvergeRow {
    name: String,
    values: Vec<f64>,
    orders: Vec<f64>,
    fitted: f64,
    required: bool,
}

pub fn converge(cfg: &RunConfig, run: &mut Run) -> Result<Verdict, CliError> {
    let c = &cfg.converge;
    let specs: Vec<GeometrySpec> = c.factors.iter().map(|&f| cfg.geometry.refined(f)).collect();
    let mut nodes = Vec::new();
    let mut hs = Vec::new();
    let mut named: Vec<(String, Vec<f64>)> = Vec::new();
    match c.quantity {
        ConvergeQuantity::Identities => {
            let opts = cfg.identity_options();
            let mut reports = Vec::new();
            for (spec, f) in specs.iter().zip(&c.factors) {
                let disc = discretize(run, cfg, spec, &format!("x{f}"))?;
                reports.push(run.time(format!("identity suite N={}", disc.nodes()), || identity_suite(&disc, &opts))?);
            }
            nodes = reports.iter().map(|r| r.nodes).collect();
            hs = reports.iter().map(|r| r.h).collect();
            named = refining_orders(&reports).into_iter().map(|o| (o.name, o.values)).collect();
        }
        ConvergeQuantity::Area => {
            let mut errors = Vec::new();
            for spec in &specs {
                let exact = spec
                    .analytic_area()
                    .ok_or_else(|| CliError::Config(format!("no analytic area for {:?}", spec.shape)))?;
                let q = run.time("quadrature", || build_quadrature(spec))?;
                nodes.push(q.len());
                hs.push(q.h);
                errors.push((q.area() / exact - 1.0).abs());
            }
            named.push(("area".into(), errors));
        }
    }

    let mut verdict = Verdict::default();
    let rows: Vec<ConvergeRow> = named
        .into_iter()
        .map(|(name, values)| {
            let required = c.checks.is_empty() || c.checks.contains(&name);
            ConvergeRow {
                orders: observed_orders(&hs, &values),
                fitted: fitted_order(&hs, &values),
                required,
                name,
                values,
            }
        })
        .collect();
    for r in rows.iter().filter(|r| r.required) {
        verdict.check(r.fitted >= c.min_order, || {
            format!("{}: fitted order {:.2} below {}", r.name, r.fitted, c.min_order)
        });
    }
    for name in c.checks.iter().filter(|n| !rows.iter().any(|r| &r.name == *n)) {
        verdict.failures.push(format!("unknown check {name}"));
    }

    #[derive(Serialize)]
    struct Out<'a> {
        quantity: ConvergeQuantity,
        factors: &'a [usize],
        nodes: &'a [usize],
        h: &'a [f64],
        rows: &'a [ConvergeRow],
    }
    run.json(
        "converge.json",
        &Out {
            quantity: c.quantity,
            factors: &c.factors,
            nodes: &nodes,
            h: &hs,
            rows: &rows,
        },
    )?;
    let mut csv = String::from("name,factor,nodes,h,value\n");
    for r in &rows {
        for k in 0..hs.len() {
            csv.push_str(&format!("{},{},{},{:.6e},{:.12e}\n", r.name, c.factors[k], nodes[k], hs[k], r.values[k]));
        }
    }
    run.write("converge.csv", &csv)?;
    let mut header: Vec<String> = vec!["quantity".into()];
    header.extend(nodes.iter().map(|n| format!("N={n}")));
    header.push("fitted order".into());
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut row = vec![r.name.clone()];
            row.extend(r.values.iter().map(|v| sci(*v)));
            row.push(format!("{:.2}", r.fitted));
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    run.write("converge.md", &format!("# Convergence\n\n{}", markdown_table(&header, &table)))?;
    for r in &rows {
        println!("converge {}: {:?} order {:.2}", r.name, r.values, r.fitted);
    }
    Ok(verdict)
}
