//! One test per acceptance criterion. Each prints a single
//! `criterion NN PASS|FAIL|SKIP ...` line to stderr (uncaptured) and then
//! asserts, so `cargo test --test acceptance` shows the whole board.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tmcf::cluster::{cut, hac, naive_partition, Linkage, Partition, PartitionMethod};
use tmcf::dataset::{load_tm_series, FlowSet, LoadOptions, SplitConfig, TmSeries, TraceFormat, WindowedDataset};
use tmcf::eval::{ari, cluster_stats, k_sweep, kneedle, nmi, Grouping};
use tmcf::pipeline::Prepared;
use tmcf::predict::{GruConfig, GruModel, Scratch};
use tmcf::repr::{jsd_pmf, pairwise_dissimilarity, psd_rep, represent, DissimilarityMatrix, Metric, ReprConfig, ReprKind, WelchParams};
use tmcf::synth::{generate, SynthSpec};

type Outcome = Result<String, String>;

fn report(n: u32, name: &str, budget_s: f64, started: Instant, outcome: Outcome) {
    let secs = started.elapsed().as_secs_f64();
    let (ok, detail) = match outcome {
        Ok(d) if secs < budget_s => (true, d),
        Ok(d) => (false, format!("{d}; took {secs:.1} s, budget {budget_s} s")),
        Err(d) => (false, d),
    };
    let line = format!("criterion {n:02} {} {name}: {detail} [{secs:.2} s]\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    assert!(ok, "{}", line.trim_end());
}

fn skip(n: u32, name: &str, why: &str) {
    let line = format!("criterion {n:02} SKIP {name}: {why}\n");
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_pmf(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random::<f64>() }).collect();
    if v.iter().all(|&x| x == 0.0) {
        v[0] = 1.0;
    }
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

#[test]
fn criterion_01_jsd_suite() {
    let started = Instant::now();
    let outcome = (|| -> Outcome {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let n = rng.random_range(2..60);
            let p = random_pmf(&mut rng, n);
            let q = random_pmf(&mut rng, n);
            let pq = jsd_pmf(&p, &q).map_err(|e| e.to_string())?;
            let qp = jsd_pmf(&q, &p).map_err(|e| e.to_string())?;
            check(pq == qp, || format!("asymmetric: {pq} vs {qp}"))?;
            check((0.0..=1.0).contains(&pq), || format!("out of range: {pq}"))?;
            check(jsd_pmf(&p, &p).unwrap() == 0.0, || "jsd(p, p) != 0".into())?;
            check(p == q || pq > 0.0, || "distinct pmfs at distance 0".into())?;
        }
        let disjoint: f64 = jsd_pmf(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        check((disjoint - 1.0).abs() < 1e-12, || format!("disjoint supports give {disjoint}"))?;
        let hand: f64 = jsd_pmf(&[0.5, 0.5], &[1.0, 0.0]).unwrap();
        check((hand - 0.3113).abs() <= 1e-4, || format!("jsd([.5,.5],[1,0]) = {hand}"))?;
        Ok(format!("500 random pairs; jsd([0.5,0.5],[1,0]) = {hand:.6}"))
    })();
    report(1, "JSD symmetry, range, identity and hand value", 1.0, started, outcome);
}

/// Agglomeration by definition: every step recomputes the linkage between all
/// live clusters from the original dissimilarities.
fn reference_hac(d: &[Vec<f64>], linkage: Linkage) -> Vec<(Vec<usize>, Vec<usize>, f64)> {
    let mut live: Vec<Vec<usize>> = (0..d.len()).map(|i| vec![i]).collect();
    let mut out = Vec::new();
    while live.len() > 1 {
        let mut best: Option<(usize, usize, f64)> = None;
        for a in 0..live.len() {
            for b in a + 1..live.len() {
                let pairs = live[a].iter().flat_map(|&i| live[b].iter().map(move |&j| (i, j)));
                let dist = match linkage {
                    Linkage::Complete => pairs.map(|(i, j)| d[i][j]).fold(f64::NEG_INFINITY, f64::max),
                    Linkage::Average => {
                        pairs.map(|(i, j)| d[i][j]).sum::<f64>() / (live[a].len() * live[b].len()) as f64
                    }
                };
                if best.is_none_or(|(_, _, h)| dist < h) {
                    best = Some((a, b, dist));
                }
            }
        }
        let (a, b, h) = best.unwrap();
        out.push((live[a].clone(), live[b].clone(), h));
        let mut merged = live[a].clone();
        merged.extend(&live[b]);
        merged.sort_unstable();
        live.remove(b);
        live[a] = merged;
        live.sort_by_key(|c| c[0]);
    }
    out
}

#[test]
fn criterion_02_hac_oracle() {
    let started = Instant::now();
    let outcome = (|| -> Outcome {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut steps = 0;
        for trial in 0..100 {
            let m = rng.random_range(2..=8);
            let mut d = vec![vec![0.0; m]; m];
            for i in 0..m {
                for j in i + 1..m {
                    let v = rng.random_range(0.01..10.0);
                    d[i][j] = v;
                    d[j][i] = v;
                }
            }
            let flat: Vec<f64> = d.iter().flatten().copied().collect();
            let dm = DissimilarityMatrix::new(m, flat, Metric::Euclidean).map_err(|e| e.to_string())?;
            for linkage in [Linkage::Complete, Linkage::Average] {
                let dendro = hac(&dm, linkage).map_err(|e| e.to_string())?;
                let expected = reference_hac(&d, linkage);
                let got = dendro.merge_sets();
                for (s, ((ea, eb, eh), (ga, gb))) in expected.iter().zip(&got).enumerate() {
                    check(ea == ga && eb == gb, || format!("trial {trial} {linkage:?} step {s}: {ga:?}+{gb:?}, expected {ea:?}+{eb:?}"))?;
                    let gh = dendro.merges()[s].height;
                    check((gh - eh).abs() <= 1e-12 * eh.abs().max(1.0), || format!("trial {trial} {linkage:?} step {s}: height {gh} vs {eh}"))?;
                    steps += 1;
                }
                check(got.len() == expected.len(), || format!("trial {trial}: {} merges", got.len()))?;
            }
        }
        Ok(format!("100 matrices, {steps} merge steps identical under complete and average linkage"))
    })();
    report(2, "HAC matches brute-force agglomeration", 5.0, started, outcome);
}

fn random_partition(rng: &mut ChaCha8Rng, m: usize, k: usize) -> Partition {
    let ids: Vec<usize> = (0..m).map(|_| rng.random_range(0..k)).collect();
    Partition::from_groups(&ids, PartitionMethod::Naive, None).unwrap()
}

/// Adjusted Rand index from raw pair counts.
fn pair_count_ari(a: &[usize], b: &[usize]) -> Option<f64> {
    let (mut n11, mut n10, mut n01, mut n00) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => n11 += 1.0,
                (true, false) => n10 += 1.0,
                (false, true) => n01 += 1.0,
                (false, false) => n00 += 1.0,
            }
        }
    }
    let denom = (n11 + n01) * (n01 + n00) + (n11 + n10) * (n10 + n00);
    (denom != 0.0).then(|| 2.0 * (n11 * n00 - n01 * n10) / denom)
}

#[test]
fn criterion_03_ari_nmi_oracles() {
    let started = Instant::now();
    let outcome = (|| -> Outcome {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut compared = 0;
        for _ in 0..500 {
            let m = rng.random_range(2..=12);
            let (ka, kb) = (rng.random_range(1..=m), rng.random_range(1..=m));
            let a = random_partition(&mut rng, m, ka);
            let b = random_partition(&mut rng, m, kb);
            let r = ari(&a, &b).unwrap();
            if let Some(expected) = pair_count_ari(a.labels(), b.labels()) {
                check((r - expected).abs() <= 1e-12, || format!("ari {r} vs pair count {expected} on {:?} / {:?}", a.labels(), b.labels()))?;
                compared += 1;
            }
            if a.k() > 1 && a.k() < m {
                check(ari(&a, &a).unwrap() == 1.0, || "ari(a, a) != 1".into())?;
                check((nmi(&a, &a).unwrap() - 1.0).abs() < 1e-12, || "nmi(a, a) != 1".into())?;
            }
            let mut perm: Vec<usize> = (0..a.k()).collect();
            perm.shuffle(&mut rng);
            let renamed: Vec<usize> = a.labels().iter().map(|&l| perm[l - 1]).collect();
            let renamed = Partition::from_groups(&renamed, PartitionMethod::Naive, None).unwrap();
            check(ari(&renamed, &b).unwrap() == r, || "ari changed under relabelling".into())?;
            check((nmi(&renamed, &b).unwrap() - nmi(&a, &b).unwrap()).abs() < 1e-12, || "nmi changed under relabelling".into())?;
        }
        let trials = 200;
        let mean: f64 = (0..trials)
            .map(|_| ari(&random_partition(&mut rng, 100, 5), &random_partition(&mut rng, 100, 5)).unwrap())
            .sum::<f64>()
            / trials as f64;
        check(mean.abs() <= 0.05, || format!("random-vs-random mean ARI {mean}"))?;
        Ok(format!("{compared} pair-count comparisons exact; random-vs-random mean ARI {mean:+.4}"))
    })();
    report(3, "ARI and NMI oracles", 5.0, started, outcome);
}

#[test]
fn criterion_04_gradient_check() {
    let started = Instant::now();
    let outcome = (|| -> Outcome {
        let mut worst: f64 = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (d, h) in [(1, 1), (1, 3), (2, 2), (2, 3)] {
            let window = 11;
            let n = 6;
            let inputs: Vec<f64> = (0..n * (window - 1) * d).map(|_| rng.random_range(0.0..1.0)).collect();
            let targets: Vec<f64> = (0..n * d).map(|_| rng.random_range(0.0..1.0)).collect();
            let ds = WindowedDataset::from_parts(inputs, targets, window, d).map_err(|e| e.to_string())?;
            let mut model = GruModel::<f64>::init_uniform(d, h, d, rng.random()).map_err(|e| e.to_string())?;
            // Spread the parameters so no tensor sits near zero.
            for p in model.params_mut() {
                *p *= 2.0;
            }
            let samples: Vec<usize> = (0..n).collect();
            let mut grad = vec![0.0; model.n_params()];
            model.loss_and_grad(&ds, &samples, &mut grad, &mut Scratch::default()).map_err(|e| e.to_string())?;
            let step = 1e-5;
            let mut numeric = vec![0.0; grad.len()];
            for i in 0..grad.len() {
                let orig = model.params()[i];
                model.params_mut()[i] = orig + step;
                let up = model.mse(&ds, &samples).unwrap();
                model.params_mut()[i] = orig - step;
                let down = model.mse(&ds, &samples).unwrap();
                model.params_mut()[i] = orig;
                numeric[i] = (up - down) / (2.0 * step);
            }
            for span in model.tensors() {
                let a = &grad[span.range.clone()];
                let b = &numeric[span.range.clone()];
                let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
                let rel = if scale == 0.0 { 0.0 } else { diff / scale };
                check(rel < 1e-4, || format!("d={d} H={h} tensor {}: relative error {rel:e}", span.name))?;
                worst = worst.max(rel);
            }
        }
        Ok(format!("4 shapes up to d=2, H=3; worst per-tensor relative error {worst:.2e}"))
    })();
    report(4, "BPTT gradients match central differences", 10.0, started, outcome);
}

fn planted(spec: &SynthSpec) -> (Prepared, Partition) {
    let (tm, truth) = generate::<f64>(spec).unwrap();
    (Prepared::new(tm, &SplitConfig::default()).unwrap(), truth)
}

fn recovered(prep: &Prepared, kind: ReprKind, k: usize) -> Partition {
    let reps = represent(&prep.normalized, prep.splits.train.clone(), kind, &ReprConfig::default()).unwrap();
    let d = pairwise_dissimilarity(&reps, kind.default_metric()).unwrap();
    cut(&hac(&d, Linkage::for_repr(kind)).unwrap(), k).unwrap()
}

#[test]
fn criterion_05_planted_recovery() {
    let started = Instant::now();
    let outcome = (|| -> Outcome {
        let (prep, truth) = planted(&SynthSpec::two_group_periodic(5));
        let acf = ari(&recovered(&prep, ReprKind::Acf, 2), &truth).unwrap();
        let psd = ari(&recovered(&prep, ReprKind::Psd, 2), &truth).unwrap();
        let (prep, truth) = planted(&SynthSpec::two_group_mixed_shape(5));
        let hist = ari(&recovered(&prep, ReprKind::Histogram, 2), &truth).unwrap();
        let msg = format!("ARI acf {acf}, psd {psd}, histogram {hist:.4}");
        check(acf == 1.0 && psd == 1.0 && hist >= 0.8, || msg.clone())?;
        Ok(msg)
    })();
    report(5, "planted groups recovered at K=2", 30.0, started, outcome);
}

#[test]
fn criterion_06_decomposition_gain() {
    let started = Instant::now();
    let outcome = (|| -> Outcome {
        let (prep, _) = planted(&SynthSpec::two_group_periodic(6));
        let gru = GruConfig::desk(6);
        let setup = prep.setup(&gru);
        let reps = represent(&prep.normalized, prep.splits.train.clone(), ReprKind::Acf, &ReprConfig::default()).unwrap();
        let dendro = hac(&pairwise_dissimilarity(&reps, Metric::Euclidean).unwrap(), Linkage::Average).unwrap();
        let acf = k_sweep(&setup, Grouping::Hac(&dendro), &[1, 4], 3).map_err(|e| e.to_string())?;
        let naive = k_sweep(&setup, Grouping::Naive { seed: 6 }, &[1, 4], 3).map_err(|e| e.to_string())?;
        let msg = format!(
            "mean RMSE over 3 seeds: acf K=1 {:.5} K=4 {:.5}; naive K=1 {:.5} K=4 {:.5}",
            acf.mean_rmse[0], acf.mean_rmse[1], naive.mean_rmse[0], naive.mean_rmse[1]
        );
        check(acf.mean_rmse[1] < acf.mean_rmse[0] && naive.mean_rmse[1] < naive.mean_rmse[0], || msg.clone())?;
        Ok(msg)
    })();
    report(6, "K=4 beats K=1 for acf and naive", 300.0, started, outcome);
}

#[test]
fn criterion_07_kneedle_oracle() {
    let started = Instant::now();
    let outcome = (|| -> Outcome {
        let ks: Vec<usize> = (1..=10).collect();
        let inverse: Vec<f64> = ks.iter().map(|&k| 1.0 / k as f64).collect();
        let knee = kneedle(&ks, &inverse).map_err(|e| e.to_string())?;
        let linear: Vec<f64> = ks.iter().map(|&k| 10.0 - k as f64).collect();
        let flat = kneedle(&ks, &linear).map_err(|e| e.to_string())?;
        let msg = format!("knee of 1/k at k={} (found {}); linear curve found={}", knee.k, knee.found, flat.found);
        check(knee.found && knee.k == 2 && !flat.found, || msg.clone())?;
        Ok(msg)
    })();
    report(7, "kneedle on 1/k and a line", 1.0, started, outcome);
}

#[test]
fn criterion_08_welch_sanity() {
    let started = Instant::now();
    let outcome = (|| -> Outcome {
        let fs = 12.0;
        let steps = 12 * 24 * 14;
        let x: Vec<f64> = (0..steps).map(|t| 3.0 + 2.0 * (std::f64::consts::TAU * t as f64 / (12.0 * 24.0)).sin()).collect();
        let psd = psd_rep(&x, fs, &WelchParams::default()).map_err(|e| e.to_string())?;
        let peak = (0..psd.power.len()).max_by(|&a, &b| psd.power[a].total_cmp(&psd.power[b])).unwrap();
        let nearest = (0..psd.freqs.len())
            .min_by(|&a, &b| (psd.freqs[a] - 1.0 / 24.0).abs().total_cmp(&(psd.freqs[b] - 1.0 / 24.0).abs()))
            .unwrap();
        check(peak == nearest, || format!("peak bin {peak} ({}/h), nearest to 1/24 is {nearest}", psd.freqs[peak]))?;
        let df = psd.freqs[1] - psd.freqs[0];
        let power: f64 = psd.power.iter().sum::<f64>() * df;
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64;
        let rel = (power - var).abs() / var;
        check(rel <= 0.05, || format!("integrated PSD {power:.4} vs variance {var:.4}"))?;
        Ok(format!("peak at {:.4} cycles/h; integrated PSD within {:.2}% of variance", psd.freqs[peak], rel * 100.0))
    })();
    report(8, "Welch peak location and Parseval", 1.0, started, outcome);
}

fn tmcf(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_tmcf")).args(args).current_dir(dir).output().expect("spawn tmcf")
}

#[test]
fn criterion_09_pipeline_determinism() {
    let started = Instant::now();
    let outcome = (|| -> Outcome {
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let config = r#"{
  "data": {"source": "preset", "preset": "two_group_periodic", "seed": 9},
  "representation": "acf",
  "sweep": {"k_grid": [1, 2, 4], "repetitions": 1},
  "seed": 9,
  "output_dir": "unused"
}"#;
        fs::write(tmp.path().join("config.json"), config).unwrap();
        let mut reports = Vec::new();
        for out in ["a", "b"] {
            let o = tmcf(&["run", "--config", "config.json", "--output-dir", out], tmp.path());
            check(o.status.success(), || format!("run {out} failed: {}", String::from_utf8_lossy(&o.stderr)))?;
            reports.push(fs::read(tmp.path().join(out).join("eval_report.json")).map_err(|e| e.to_string())?);
        }
        check(reports[0] == reports[1], || "eval_report.json differs between runs".into())?;
        Ok(format!("two runs, eval_report.json byte-identical ({} bytes)", reports[0].len()))
    })();
    report(9, "identical runs give identical reports", 120.0, started, outcome);
}

#[test]
fn criterion_10_naive_size_law() {
    let started = Instant::now();
    let outcome = (|| -> Outcome {
        for (m, k, allowed) in [(144, 21, [6, 7]), (529, 50, [10, 11])] {
            for seed in 0..20 {
                let p = naive_partition(m, k, seed).map_err(|e| e.to_string())?;
                let sizes: BTreeSet<usize> = p.sizes().into_iter().collect();
                check(sizes.iter().all(|s| allowed.contains(s)), || format!("M={m} K={k}: sizes {sizes:?}"))?;
                check(cluster_stats(&p).n_singletons == 0 && p.k() == k, || format!("M={m} K={k}: singletons"))?;
            }
        }
        Ok("sizes in {6,7} for (144,21) and {10,11} for (529,50), no singletons, 20 seeds each".into())
    })();
    report(10, "naive partition sizes", 1.0, started, outcome);
}

fn first_steps(tm: &TmSeries<f64>, steps: usize) -> TmSeries<f64> {
    let n = tm.n_flows();
    let steps = steps.min(tm.len());
    let flows: Vec<Vec<f64>> = (0..n).map(|m| (0..steps).map(|t| tm.matrix(t)[m]).collect()).collect();
    let ts = tm.timestamps().map(|t| t[..steps].to_vec());
    FlowSet::new(tm.n_nodes(), tm.interval_seconds(), flows).unwrap().reassemble(ts).unwrap()
}

/// Set `TMCF_ABILENE` to an Abilene archive directory to enable.
#[test]
fn criterion_11_abilene_ordering() {
    let Some(dir) = std::env::var_os("TMCF_ABILENE").map(PathBuf::from) else {
        skip(11, "Abilene ordering local <= clustered < EM", "TMCF_ABILENE not set");
        return;
    };
    let started = Instant::now();
    let outcome = (|| -> Outcome {
        let tm = load_tm_series(&dir, TraceFormat::Abilene, &LoadOptions { zero_fill_missing: true, ..LoadOptions::default() })
            .map_err(|e| e.to_string())?;
        let two_weeks = 14 * 86_400 / tm.interval_seconds() as usize;
        let prep = Prepared::new(first_steps(&tm, two_weeks), &SplitConfig::default()).map_err(|e| e.to_string())?;
        let m = prep.flows.n_flows();
        let gru = GruConfig::desk(11);
        let setup = prep.setup(&gru);
        let reps = represent(&prep.normalized, prep.splits.train.clone(), ReprKind::Histogram, &ReprConfig::default())
            .map_err(|e| e.to_string())?;
        let dendro = hac(&pairwise_dissimilarity(&reps, Metric::Jsd).unwrap(), Linkage::Complete).unwrap();
        let grid: Vec<usize> = [1, 2, 4, 8, 16, 32, 64].into_iter().filter(|&k| k < m).collect();
        let curve = k_sweep(&setup, Grouping::Hac(&dendro), &grid, 1).map_err(|e| e.to_string())?;
        let knee = curve.knee().map_err(|e| e.to_string())?;
        let clustered = curve.rmse_at(knee.k).unwrap();
        let em = curve.rmse_at(1).unwrap();
        let local = k_sweep(&setup, Grouping::Hac(&dendro), &[m], 1).map_err(|e| e.to_string())?.mean_rmse[0];
        let msg = format!("local {local:.5}, clustered (K={}) {clustered:.5}, EM {em:.5}", knee.k);
        check(clustered < em && local <= clustered, || msg.clone())?;
        Ok(msg)
    })();
    report(11, "Abilene ordering local <= clustered < EM", 3600.0, started, outcome);
}
