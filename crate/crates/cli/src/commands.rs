//! One function per subcommand. Each loads its instances, runs them (in
//! parallel where instances are independent) and writes artifacts in a fixed
//! order so identical settings give identical files.

use std::fs;
use std::path::Path;

use falqon_core::annealing::{compare_with_anneal, run_linear_anneal, AnnealConfig};
use falqon_core::export::{optimizer_log_csv, trace_csv};
use falqon_core::falqon::{run_falqon, run_falqon_iterative, scan_critical_dt, standard_norms, FalqonConfig};
use falqon_core::graphs::{
    assign_uniform_weights, dedupe_nonisomorphic, enumerate_connected_regular_graphs, generate_connected_regular_graph,
    nonisomorphic_regular_graphs,
};
use falqon_core::metrics::check_qlc_convergence_criteria;
use falqon_core::qaoa::{falqon_plus as run_falqon_plus, multistart_qaoa};
use falqon_core::{DriverSpec, Error, FalqonTrace, FeedbackLaw, Graph, InitKind, StateVector};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::output::{csv, layer_summary, mean_std, Artifact, Named, OutDir};
use crate::settings::*;

/// Energy increases up to this multiple of `||H_p||` count as round-off.
const ROUND_OFF_REL: f64 = 1e-12;

fn param(msg: impl Into<String>) -> anyhow::Error {
    Error::Parameter(msg.into()).into()
}

fn load_graphs(src: &GraphSource) -> anyhow::Result<Vec<Named>> {
    let mut files = src.graph.clone();
    if let Some(dir) = &src.graph_dir {
        let mut found: Vec<_> = fs::read_dir(dir)
            .map_err(|e| param(format!("cannot read directory {}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "edges"))
            .collect();
        found.sort();
        files.extend(found);
    }
    let mut out = Vec::new();
    for path in files {
        let text = fs::read_to_string(&path).map_err(|e| param(format!("cannot read graph {}: {e}", path.display())))?;
        let graph = Graph::from_edge_list(&text)?;
        let name = path.file_stem().map_or_else(|| "graph".into(), |s| s.to_string_lossy().into_owned());
        out.push(Named { name, source: path.display().to_string(), graph });
    }
    if let Some(spec) = &src.regular {
        let (n, d) = spec
            .split_once(',')
            .and_then(|(n, d)| Some((n.trim().parse().ok()?, d.trim().parse().ok()?)))
            .ok_or_else(|| param(format!("--regular expects N,D, got `{spec}`")))?;
        for (i, graph) in nonisomorphic_regular_graphs(n, d)?.into_iter().enumerate() {
            out.push(Named { name: format!("g{i:03}"), source: format!("regular:{n},{d}#{i}"), graph });
        }
    }
    if out.is_empty() {
        return Err(param("no instances: give --graph, --graph-dir or --regular"));
    }
    if let Some(seed) = src.weights_seed {
        // Instance i gets its own weight stream.
        for (i, inst) in out.iter_mut().enumerate() {
            inst.graph = assign_uniform_weights(&inst.graph, seed + i as u64);
        }
    }
    let mut names: Vec<&str> = out.iter().map(|i| i.name.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(param(format!("duplicate instance name `{}`", w[0])));
    }
    Ok(out)
}

fn report(command: &str, out: &OutDir) {
    let files: Vec<String> = out.written().iter().map(|p| p.display().to_string()).collect();
    println!("{}", json!({ "command": command, "out_dir": out.root().display().to_string(), "files": files }));
}

pub fn gen_graphs(s: &GenGraphs, root: &Path) -> anyhow::Result<()> {
    let mut graphs = if s.count == "all" {
        enumerate_connected_regular_graphs(s.n, s.degree)?
    } else {
        let k: u64 = s.count.parse().map_err(|_| param(format!("--count expects `all` or a number, got `{}`", s.count)))?;
        (0..k).map(|i| generate_connected_regular_graph(s.n, s.degree, s.seed + i)).collect::<Result<_, _>>()?
    };
    if s.dedupe {
        graphs = dedupe_nonisomorphic(&graphs)?;
    }
    if let Some(seed) = s.weights_seed {
        graphs = graphs.iter().enumerate().map(|(i, g)| assign_uniform_weights(g, seed + i as u64)).collect();
    }
    let mut out = OutDir::create(root)?;
    let mut files = Vec::new();
    for (i, g) in graphs.iter().enumerate() {
        let name = format!("graph_{i:03}.edges");
        out.write(&name, &g.to_edge_list())?;
        files.push(json!({ "file": name, "edges": g.edges().len(), "graph_hash": g.content_hash() }));
    }
    let config = echo(s);
    out.write_json("manifest.json", &Artifact::new("gen-graphs", &config, vec![s.seed], None, files))?;
    report("gen-graphs", &out);
    Ok(())
}

#[derive(Serialize)]
struct RunSummary {
    realization: u64,
    estimator_seed: u64,
    layers: usize,
    termination_reason: falqon_core::TerminationReason,
    initial_energy: f64,
    final_energy: f64,
    final_ratio: f64,
    final_phi: f64,
    energy_increases: usize,
}

fn trace_name(name: &str, realization: u64, realizations: u64) -> String {
    if realizations == 1 {
        format!("{name}.trace.csv")
    } else {
        format!("{name}.r{realization:03}.trace.csv")
    }
}

pub fn falqon(s: &Falqon, root: &Path) -> anyhow::Result<()> {
    if s.realizations == 0 {
        return Err(param("--realizations must be at least 1"));
    }
    s.config(0).validate()?;
    let insts = load_graphs(&s.source)?;
    let jobs: Vec<(usize, u64)> = (0..insts.len()).flat_map(|i| (0..s.realizations).map(move |r| (i, r))).collect();
    let traces: Vec<FalqonTrace> = jobs
        .par_iter()
        .map(|&(i, r)| run_falqon::<f64>(&insts[i].graph, &s.config(r)))
        .collect::<Result<_, _>>()?;

    let config = echo(s);
    let mut out = OutDir::create(root)?;
    let seeds: Vec<u64> = (0..s.realizations).map(|r| s.seed + r).collect();
    for (i, inst) in insts.iter().enumerate() {
        let (n_p, _) = standard_norms(&inst.graph)?;
        let mut runs = Vec::new();
        for r in 0..s.realizations {
            let t = &traces[i * s.realizations as usize + r as usize];
            out.write(&trace_name(&inst.name, r, s.realizations), &trace_csv(t))?;
            runs.push(RunSummary {
                realization: r,
                estimator_seed: s.seed + r,
                layers: t.len(),
                termination_reason: t.termination_reason,
                initial_energy: t.initial_energy,
                final_energy: t.final_energy(),
                final_ratio: t.final_ratio(),
                final_phi: t.final_phi(),
                energy_increases: t.monotonicity_violations(ROUND_OFF_REL * n_p).len(),
            });
        }
        out.write_json(&format!("{}.json", inst.name), &Artifact::new("falqon", &config, seeds.clone(), Some(inst), runs))?;
    }
    let series: Vec<(&[f64], &[f64])> = traces.iter().map(|t| (&t.ratio[..], &t.phi[..])).collect();
    out.write("summary.csv", &layer_summary(&series, 1))?;
    let (mr, sr) = mean_std(&traces.iter().map(|t| t.final_ratio()).collect::<Vec<_>>());
    let (mp, sp) = mean_std(&traces.iter().map(|t| t.final_phi()).collect::<Vec<_>>());
    let result = json!({
        "instances": insts.iter().map(|i| &i.name).collect::<Vec<_>>(),
        "runs": traces.len(),
        "final_ratio": { "mean": mr, "std": sr },
        "final_phi": { "mean": mp, "std": sp },
    });
    out.write_json("summary.json", &Artifact::new("falqon", &config, seeds, None, result))?;
    report("falqon", &out);
    Ok(())
}

pub fn falqon_iter(s: &FalqonIter, root: &Path) -> anyhow::Result<()> {
    let cfg = FalqonConfig { law: FeedbackLaw::Linear { w: s.gain }, ..FalqonConfig::fixed_length(s.dt, s.layers) };
    cfg.validate()?;
    let insts = load_graphs(&s.source)?;
    let runs: Vec<Vec<FalqonTrace>> = insts
        .par_iter()
        .map(|inst| run_falqon_iterative::<f64>(&inst.graph, &cfg, s.iterations))
        .collect::<Result<_, _>>()?;

    let config = echo(s);
    let mut out = OutDir::create(root)?;
    let mut rows = Vec::new();
    for (inst, traces) in insts.iter().zip(&runs) {
        let mut per_iter = Vec::new();
        for (j, t) in traces.iter().enumerate() {
            out.write(&format!("{}.iter{j}.trace.csv", inst.name), &trace_csv(t))?;
            let tail = *t.applied.last().expect("non-empty trace");
            per_iter.push(json!({
                "iteration": j,
                "final_energy": t.final_energy(),
                "final_ratio": t.final_ratio(),
                "final_phi": t.final_phi(),
                "final_control": tail,
            }));
            rows.push(vec![
                inst.name.clone(),
                j.to_string(),
                t.final_energy().to_string(),
                t.final_ratio().to_string(),
                t.final_phi().to_string(),
                tail.to_string(),
            ]);
        }
        out.write_json(&format!("{}.json", inst.name), &Artifact::new("falqon-iter", &config, vec![], Some(inst), per_iter))?;
    }
    out.write("summary.csv", &csv("instance,iteration,final_energy,r_A,phi,final_control", rows))?;
    report("falqon-iter", &out);
    Ok(())
}

pub fn falqon_plus(s: &FalqonPlus, root: &Path) -> anyhow::Result<()> {
    let insts = load_graphs(&s.source)?;
    let opts = s.bfgs.options();
    let results: Vec<_> = insts
        .par_iter()
        .map(|inst| run_falqon_plus(&inst.graph, s.layers, s.dt, &opts))
        .collect::<Result<_, _>>()?;

    let config = echo(s);
    let mut out = OutDir::create(root)?;
    let mut rows = Vec::new();
    for (inst, r) in insts.iter().zip(&results) {
        out.write(&format!("{}.optimizer.csv", inst.name), &optimizer_log_csv(&r.optimized.log))?;
        out.write_json(&format!("{}.json", inst.name), &Artifact::new("falqon-plus", &config, vec![], Some(inst), r))?;
        rows.push(vec![
            inst.name.clone(),
            r.seed_ratio.to_string(),
            r.seed_phi.to_string(),
            r.optimized.ratio.to_string(),
            r.optimized.phi.to_string(),
            r.optimized.iterations.to_string(),
            r.optimized.converged.to_string(),
        ]);
    }
    out.write("summary.csv", &csv("instance,seed_r_A,seed_phi,r_A,phi,iterations,converged", rows))?;
    report("falqon-plus", &out);
    Ok(())
}

pub fn multistart(s: &Multistart, root: &Path) -> anyhow::Result<()> {
    let insts = load_graphs(&s.source)?;
    let opts = s.bfgs.options();
    // Starts already run in parallel inside each call.
    let stats: Vec<_> = insts
        .iter()
        .map(|inst| multistart_qaoa(&inst.graph, s.layers, s.starts, s.seed, &opts))
        .collect::<Result<_, _>>()?;

    let config = echo(s);
    let mut out = OutDir::create(root)?;
    let mut rows = Vec::new();
    for (inst, st) in insts.iter().zip(&stats) {
        out.write_json(&format!("{}.json", inst.name), &Artifact::new("qaoa-multistart", &config, vec![s.seed], Some(inst), st))?;
        let mut row = vec![inst.name.clone()];
        row.extend([st.max_ratio, st.median_ratio, st.min_ratio, st.max_phi, st.median_phi, st.min_phi].iter().map(f64::to_string));
        rows.push(row);
    }
    out.write("summary.csv", &csv("instance,max_r_A,median_r_A,min_r_A,max_phi,median_phi,min_phi", rows))?;
    report("qaoa-multistart", &out);
    Ok(())
}

pub fn anneal(s: &Anneal, root: &Path) -> anyhow::Result<()> {
    let cfg = AnnealConfig::linear(s.total_time, s.dt);
    cfg.validate()?;
    let insts = load_graphs(&s.source)?;
    let traces: Vec<FalqonTrace> = insts
        .par_iter()
        .map(|inst| run_linear_anneal::<f64>(&inst.graph, &cfg))
        .collect::<Result<_, _>>()?;

    let config = echo(s);
    let mut out = OutDir::create(root)?;
    for (inst, t) in insts.iter().zip(&traces) {
        out.write(&format!("{}.trace.csv", inst.name), &trace_csv(t))?;
        let result = json!({
            "steps": t.len(),
            "beta_column": "schedule value u at the midpoint of each step",
            "final_energy": t.final_energy(),
            "final_ratio": t.final_ratio(),
            "final_phi": t.final_phi(),
        });
        out.write_json(&format!("{}.json", inst.name), &Artifact::new("anneal", &config, vec![], Some(inst), result))?;
    }
    let series: Vec<(&[f64], &[f64])> = traces.iter().map(|t| (&t.ratio[..], &t.phi[..])).collect();
    out.write("summary.csv", &layer_summary(&series, 1))?;
    report("anneal", &out);
    Ok(())
}

pub fn compare(s: &Compare, root: &Path) -> anyhow::Result<()> {
    let threshold = s.threshold()?;
    let cfg = FalqonConfig::fixed_length(s.dt, s.layers);
    cfg.validate()?;
    let insts = load_graphs(&s.source)?;
    let results: Vec<_> = insts
        .par_iter()
        .map(|inst| match s.against {
            Baseline::Anneal => compare_with_anneal(&inst.graph, &cfg, threshold),
        })
        .collect::<Result<_, _>>()?;

    let config = echo(s);
    let mut out = OutDir::create(root)?;
    let mut rows = Vec::new();
    for (inst, r) in insts.iter().zip(&results) {
        let mut row = vec![inst.name.clone(), threshold.to_string()];
        match r {
            Some(c) => {
                let curves = c
                    .falqon_ratio_curve
                    .iter()
                    .zip(&c.anneal_ratio_curve)
                    .enumerate()
                    .map(|(k, (f, a))| vec![(k + 1).to_string(), f.to_string(), a.to_string()]);
                out.write(&format!("{}.curves.csv", inst.name), &csv("step,falqon_r_A,anneal_r_A", curves))?;
                row.extend(
                    [c.total_time, c.layers as f64, c.falqon_ratio, c.falqon_phi, c.anneal_ratio, c.anneal_phi]
                        .iter()
                        .map(f64::to_string),
                );
            }
            None => {
                log::warn!("{}: threshold {threshold} not reached within {} layers", inst.name, s.layers);
                row.extend(std::iter::repeat_n(String::new(), 6));
            }
        }
        rows.push(row);
    }
    out.write("summary.csv", &csv("instance,threshold,T,layers,falqon_r_A,falqon_phi,anneal_r_A,anneal_phi", rows))?;
    let per_instance: Vec<_> = insts.iter().zip(&results).map(|(i, r)| json!({ "instance": i.name, "comparison": r })).collect();
    out.write_json("summary.json", &Artifact::new("compare", &config, vec![], None, per_instance))?;
    report("compare", &out);
    Ok(())
}

pub fn dt_scan(s: &DtScan, root: &Path) -> anyhow::Result<()> {
    let insts = load_graphs(&s.source)?;
    let graphs: Vec<Graph> = insts.iter().map(|i| i.graph.clone()).collect();
    let result = scan_critical_dt(&graphs, &s.options())?;

    let config = echo(s);
    let mut out = OutDir::create(root)?;
    let probes = result.probes.iter().map(|(dt, ok)| vec![dt.to_string(), ok.to_string()]);
    out.write("dt_scan_probes.csv", &csv("dt,all_monotone", probes))?;
    let body = json!({
        "instances": insts.iter().map(|i| json!({ "name": i.name, "graph_hash": i.graph.content_hash() })).collect::<Vec<_>>(),
        "scan": result,
    });
    out.write_json("dt_scan.json", &Artifact::new("dt-scan", &config, vec![], None, body))?;
    report("dt-scan", &out);
    Ok(())
}

pub fn diagnose(s: &Diagnose, root: &Path) -> anyhow::Result<()> {
    let insts = load_graphs(&s.source)?;
    let config = echo(s);
    let mut out = OutDir::create(root)?;
    let mut rows = Vec::new();
    for inst in &insts {
        let psi0 = StateVector::new(inst.graph.n(), InitKind::DriverGround)?;
        let report = check_qlc_convergence_criteria(&inst.graph, &DriverSpec::SumX, &psi0)?;
        let (n_p, n_d) = standard_norms(&inst.graph)?;
        rows.push(vec![
            inst.name.clone(),
            inst.graph.n().to_string(),
            n_p.to_string(),
            n_d.to_string(),
            report.degenerate_eigenvalues.to_string(),
            report.degenerate_gaps.to_string(),
            report.driver_connects_all_pairs.to_string(),
            report.initial_energy_below_first_excited.to_string(),
        ]);
        let body = json!({ "norm_problem": n_p, "norm_driver": n_d, "criteria": report, "all_satisfied": report.all_satisfied() });
        out.write_json(&format!("{}.json", inst.name), &Artifact::new("diagnose", &config, vec![], Some(inst), body))?;
    }
    out.write(
        "summary.csv",
        &csv(
            "instance,n,norm_H_p,norm_H_d,degenerate_eigenvalues,degenerate_gaps,driver_connects_all_pairs,initial_energy_below_first_excited",
            rows,
        ),
    )?;
    report("diagnose", &out);
    Ok(())
}
