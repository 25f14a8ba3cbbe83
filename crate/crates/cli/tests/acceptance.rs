//! One test per acceptance criterion. Each prints a PASS/FAIL line before
//! asserting.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use feclust::cluster::{average_linkage, cluster_count, cut, davies_bouldin, silhouette_score, sweep, SweepConfig};
use feclust::corpus::{allocate, Feature, Source};
use feclust::embed::{affinity, embed_texts, hashing_embed, AffinityMatrix, EmbedOptions, EmbeddingMatrix, HashingEmbedder};
use feclust::eval::{align_review, f_beta, features_match, DEFAULT_BETA};
use feclust::select::{select, SelectionConfig, Strategy};
use feclust::taxonomy::{merge_taxonomies, NodeKind, Taxonomy, TaxonomyNode};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(criterion: u32, name: &str, ok: bool, detail: &str) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("criterion {criterion} [{name}]: {tag} {detail}");
    assert!(ok, "criterion {criterion} failed: {detail}");
}

fn within(limit: Duration, started: Instant) -> (bool, String) {
    let took = started.elapsed();
    (took < limit, format!("{:.2?} (limit {:?})", took, limit))
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

// ---------------------------------------------------------------- 1

#[test]
fn c1_table_fbeta_reproduction() {
    let started = Instant::now();
    let mut rdr = csv::Reader::from_path(fixtures().join("table1.csv")).unwrap();
    let mut cells = 0;
    let mut misses = Vec::new();
    for row in rdr.records() {
        let row = row.unwrap();
        let num = |i: usize| row[i].parse::<f64>().unwrap();
        let (p, r, printed) = (num(3), num(4), num(5));
        let f = f_beta(p, r, DEFAULT_BETA);
        cells += 1;
        if (f - printed).abs() > 0.001 {
            misses.push(format!(
                "{}/{}/n={}: P={p} R={r} printed {printed} recomputed {f:.4}",
                &row[0], &row[1], &row[2]
            ));
        }
    }
    for m in &misses {
        println!("  miss {m}");
    }
    let (fast, time) = within(Duration::from_secs(1), started);
    verdict(
        1,
        "F-beta reproduction",
        cells == 27 && misses.is_empty() && fast,
        &format!("{}/{cells} cells within 0.001; {time}", cells - misses.len()),
    );
}

// ---------------------------------------------------------------- 2

/// Matrix-shrinking UPGMA: keep a full table over live cluster ids, merge the
/// closest pair (ties to the smallest id pair), recompute by size-weighted
/// averaging.
fn naive_upgma(d0: &Array2<f64>) -> Vec<(usize, usize, f64, usize)> {
    let n = d0.nrows();
    let mut live: Vec<usize> = (0..n).collect();
    let mut size: HashMap<usize, usize> = (0..n).map(|i| (i, 1)).collect();
    let mut dist: HashMap<(usize, usize), f64> = HashMap::new();
    for i in 0..n {
        for j in i + 1..n {
            dist.insert((i, j), d0[[i, j]]);
        }
    }
    let get = |dist: &HashMap<(usize, usize), f64>, a: usize, b: usize| dist[&(a.min(b), a.max(b))];
    let mut out = Vec::new();
    for step in 0..n - 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for (x, &a) in live.iter().enumerate() {
            for &b in &live[x + 1..] {
                let (lo, hi) = (a.min(b), a.max(b));
                let v = get(&dist, lo, hi);
                let better = match best {
                    None => true,
                    Some((bv, bl, bh)) => v < bv || (v == bv && (lo, hi) < (bl, bh)),
                };
                if better {
                    best = Some((v, lo, hi));
                }
            }
        }
        let (h, a, b) = best.unwrap();
        let new = n + step;
        let (sa, sb) = (size[&a] as f64, size[&b] as f64);
        live.retain(|&c| c != a && c != b);
        for &c in &live {
            let v = (sa * get(&dist, a, c) + sb * get(&dist, b, c)) / (sa + sb);
            dist.insert((c.min(new), c.max(new)), v);
        }
        size.insert(new, size[&a] + size[&b]);
        live.push(new);
        out.push((a, b, h, size[&new]));
    }
    out
}

fn random_dissimilarity(rng: &mut ChaCha8Rng, n: usize, quantised: bool) -> Array2<f64> {
    let mut m = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let v = if quantised {
                rng.random_range(1..=8) as f64 / 8.0
            } else {
                rng.random::<f64>() * 2.0
            };
            m[[i, j]] = v;
            m[[j, i]] = v;
        }
    }
    m
}

#[test]
fn c2_linkage_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut bad = Vec::new();
    for case in 0..200 {
        let n = rng.random_range(2..=64);
        let m = random_dissimilarity(&mut rng, n, case % 2 == 1);
        let got = average_linkage(&AffinityMatrix::from_matrix(m.clone()).unwrap()).unwrap();
        let want = naive_upgma(&m);
        let same = got.merges.len() == want.len()
            && got
                .merges
                .iter()
                .zip(&want)
                .all(|(g, w)| (g.left, g.right, g.size) == (w.0, w.1, w.3) && (g.height - w.2).abs() <= 1e-10);
        if !same {
            bad.push(case);
        }
    }
    let (fast, time) = within(Duration::from_secs(30), started);
    verdict(
        2,
        "linkage oracle",
        bad.is_empty() && fast,
        &format!("{} of 200 matrices differ {bad:?}; {time}", bad.len()),
    );
}

// ---------------------------------------------------------------- 3

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn brute_silhouette(x: &[Vec<f64>], lab: &[usize]) -> f64 {
    let n = x.len();
    let d = |i: usize, j: usize| {
        let c: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| a * b).sum();
        (1.0 - c).clamp(0.0, 2.0)
    };
    let labels: Vec<usize> = {
        let mut l = lab.to_vec();
        l.sort_unstable();
        l.dedup();
        l
    };
    let mut total = 0.0;
    for i in 0..n {
        let own: Vec<usize> = (0..n).filter(|&j| j != i && lab[j] == lab[i]).collect();
        if own.is_empty() {
            continue;
        }
        let a = own.iter().map(|&j| d(i, j)).sum::<f64>() / own.len() as f64;
        let b = labels
            .iter()
            .filter(|&&c| c != lab[i])
            .map(|&c| {
                let other: Vec<usize> = (0..n).filter(|&j| lab[j] == c).collect();
                other.iter().map(|&j| d(i, j)).sum::<f64>() / other.len() as f64
            })
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    total / n as f64
}

fn brute_db(x: &[Vec<f64>], lab: &[usize]) -> f64 {
    let mut labels = lab.to_vec();
    labels.sort_unstable();
    labels.dedup();
    let dim = x[0].len();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let mut cent = Vec::new();
    let mut scat = Vec::new();
    for &c in &labels {
        let members: Vec<&Vec<f64>> = x.iter().zip(lab).filter(|(_, &l)| l == c).map(|(v, _)| v).collect();
        let mut m = vec![0.0; dim];
        for v in &members {
            for (a, b) in m.iter_mut().zip(v.iter()) {
                *a += b;
            }
        }
        m.iter_mut().for_each(|a| *a /= members.len() as f64);
        scat.push(members.iter().map(|v| dist(v, &m)).sum::<f64>() / members.len() as f64);
        cent.push(m);
    }
    let k = labels.len();
    (0..k)
        .map(|i| {
            (0..k)
                .filter(|&j| j != i)
                .map(|j| (scat[i] + scat[j]) / dist(&cent[i], &cent[j]))
                .fold(0.0, f64::max)
        })
        .sum::<f64>()
        / k as f64
}

#[test]
fn c3_metric_oracles() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(3..=100);
        let k = rng.random_range(2..n);
        let dim = rng.random_range(2..=8);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| unit(&(0..dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect::<Vec<_>>()))
            .collect();
        let mut lab: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
        // shuffle so the guaranteed members are not always first
        for i in (1..n).rev() {
            lab.swap(i, rng.random_range(0..=i));
        }
        let ids = (0..n).map(|i| format!("f{i}")).collect();
        let e = EmbeddingMatrix::from_rows(ids, rows.clone(), "oracle").unwrap();
        let s = silhouette_score(&e, &lab).unwrap().mean;
        let db = davies_bouldin(&e, &lab).unwrap().score;
        worst = worst.max((s - brute_silhouette(&rows, &lab)).abs());
        worst = worst.max((db - brute_db(&rows, &lab)).abs());
    }
    let (fast, time) = within(Duration::from_secs(30), started);
    verdict(
        3,
        "metric oracles",
        worst <= 1e-9 && fast,
        &format!("max deviation {worst:.2e}; {time}"),
    );
}

// ---------------------------------------------------------------- 4

#[test]
fn c4_cut_monotonicity_and_refinement() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let grid = SweepConfig::default().thresholds();
    let mut failures = 0;
    for case in 0..100 {
        let n = rng.random_range(2..=40);
        let m = random_dissimilarity(&mut rng, n, case % 3 == 0);
        let d = average_linkage(&AffinityMatrix::from_matrix(m).unwrap()).unwrap();
        let cuts: Vec<Vec<usize>> = grid.iter().map(|&t| cut(&d, t)).collect();
        for a in 0..grid.len() {
            for b in a..grid.len() {
                let (fine, coarse) = (&cuts[a], &cuts[b]);
                let refines = (0..n).all(|i| (0..n).all(|j| fine[i] != fine[j] || coarse[i] == coarse[j]));
                if cluster_count(fine) < cluster_count(coarse) || !refines {
                    failures += 1;
                }
            }
        }
    }
    verdict(
        4,
        "cut monotonicity and refinement",
        failures == 0,
        &format!("{failures} violating threshold pairs over 100 dendrograms"),
    );
}

// ---------------------------------------------------------------- 5

/// Three clusters of 20 features. Each feature is its cluster's two-word
/// core plus one random five-letter token; the three alphabets are disjoint,
/// so no character trigram crosses clusters.
fn planted_features() -> Vec<String> {
    let alphabets = ["abcdefgh", "ijklmnop", "qrstuvwx"];
    let cores = ["badge faced", "lion pink", "trust vows"];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut out = Vec::new();
    for (alpha, core) in alphabets.iter().zip(cores) {
        let letters: Vec<char> = alpha.chars().collect();
        let mut tokens = std::collections::BTreeSet::new();
        while tokens.len() < 20 {
            tokens.insert((0..5).map(|_| letters[rng.random_range(0..letters.len())]).collect::<String>());
        }
        out.extend(tokens.into_iter().map(|t| format!("{core} {t}")));
    }
    out
}

fn planted_run(seed: u64) -> (usize, f64, usize) {
    let texts = planted_features();
    let provider = HashingEmbedder::new(384, seed).unwrap();
    let rows = embed_texts(&provider, &texts, EmbedOptions::default()).unwrap();
    let e = EmbeddingMatrix::from_rows(texts, rows, "hashing").unwrap();
    let a = affinity(&e).unwrap();
    let d = average_linkage(&a).unwrap();
    let cands = sweep(&e, &a, &d, &SweepConfig::default()).unwrap();
    let cfg = SelectionConfig {
        strategy: Strategy::Balanced,
        ..SelectionConfig::default()
    };
    let sel = select(&cands, &cfg).unwrap();
    let c = &cands[sel.chosen];
    (c.k, c.silhouette.unwrap(), sel.chosen)
}

#[test]
fn c5_planted_cluster_recovery() {
    let started = Instant::now();
    let first = planted_run(11);
    let again = planted_run(11);
    let (fast, time) = within(Duration::from_secs(10), started);
    let (k, sil, _) = first;
    verdict(
        5,
        "planted-cluster recovery",
        k == 3 && sil > 0.5 && first == again && fast,
        &format!("k = {k}, silhouette {sil:.3}, deterministic {}; {time}", first == again),
    );
}

// ---------------------------------------------------------------- 6

fn tax(id: usize, label: &str, leaves: usize, emb: Vec<f64>) -> Taxonomy {
    Taxonomy {
        provenance: vec![id],
        root_label_embedding: emb,
        root: TaxonomyNode {
            label: label.into(),
            kind: NodeKind::Root,
            feature: None,
            children: (0..leaves).map(|i| TaxonomyNode::leaf(&format!("{label} {i}"))).collect(),
        },
        diagnostics: vec![],
    }
}

fn leaf_total(ts: &[Taxonomy]) -> usize {
    ts.iter().map(|t| t.root.leaf_count()).sum()
}

fn angle(deg: f64) -> Vec<f64> {
    vec![deg.to_radians().cos(), deg.to_radians().sin()]
}

#[test]
fn c6_merge_semantics() {
    let started = Instant::now();
    let mut problems = Vec::new();

    let labels = ["battery", "battery", "sync", "login", "sync", "dark mode"];
    let ts: Vec<Taxonomy> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| tax(i, l, i % 3 + 1, hashing_embed(l, 128, 0)))
        .collect();
    let before = leaf_total(&ts);

    let strict = merge_taxonomies(ts.clone(), 1.0).unwrap();
    if strict.events.iter().any(|e| e.into != e.absorbed) || strict.taxonomies.len() != 4 {
        problems.push("sigma = 1 merged distinct labels or missed identical ones".to_string());
    }
    let loose = merge_taxonomies(ts.clone(), 0.0).unwrap();
    if loose.taxonomies.len() != 1 {
        problems.push(format!("sigma = 0 left {} taxonomies", loose.taxonomies.len()));
    }
    for (name, out) in [("strict", &strict), ("loose", &loose)] {
        if leaf_total(&out.taxonomies) != before {
            problems.push(format!("{name} pass lost leaves"));
        }
    }

    // Hand oracle. A at 0 deg (3 leaves), B at 20 deg (1 leaf), C at 50 deg
    // (2 leaves): sim(A,B) = cos 20 = .940, sim(B,C) = cos 30 = .866,
    // sim(A,C) = cos 50 = .643.
    //   sigma .60: A takes B (A now 4 leaves), B-C skipped, A takes C.
    //   sigma .70: A takes B, B-C skipped, A-C below sigma.
    //   sigma .90: A takes B only.
    //   sigma .95: nothing.
    // With B holding 5 leaves instead, B takes A then B takes C.
    let abc = |b_leaves: usize| vec![tax(0, "a", 3, angle(0.0)), tax(1, "b", b_leaves, angle(20.0)), tax(2, "c", 2, angle(50.0))];
    let cases: [(usize, f64, Vec<(&str, &str)>, Vec<&str>); 5] = [
        (1, 0.60, vec![("a", "b"), ("a", "c")], vec!["a"]),
        (1, 0.70, vec![("a", "b")], vec!["a", "c"]),
        (1, 0.90, vec![("a", "b")], vec!["a", "c"]),
        (1, 0.95, vec![], vec!["a", "b", "c"]),
        (5, 0.60, vec![("b", "a"), ("b", "c")], vec!["b"]),
    ];
    for (b_leaves, sigma, events, survivors) in cases {
        // Every input order gives the same events.
        for perm in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
            let base = abc(b_leaves);
            let input: Vec<Taxonomy> = perm.iter().map(|&i| base[i].clone()).collect();
            let out = merge_taxonomies(input, sigma).unwrap();
            let got: Vec<(&str, &str)> = out.events.iter().map(|e| (e.into.as_str(), e.absorbed.as_str())).collect();
            let mut alive: Vec<&str> = out.taxonomies.iter().map(|t| t.label()).collect();
            alive.sort_unstable();
            if got != events || alive != survivors || leaf_total(&out.taxonomies) != 3 + b_leaves + 2 {
                problems.push(format!("sigma {sigma}, b = {b_leaves}, order {perm:?}: events {got:?}, survivors {alive:?}"));
            }
        }
    }
    for p in &problems {
        println!("  {p}");
    }
    let (fast, time) = within(Duration::from_secs(5), started);
    verdict(6, "merge semantics", problems.is_empty() && fast, &format!("{} problems; {time}", problems.len()));
}

// ---------------------------------------------------------------- 7

fn run_offline(out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_feclust"))
        .args(["run", "--offline", "--seed", "7", "--config"])
        .arg(fixtures().join("config.json"))
        .arg("--output-dir")
        .arg(out)
        .output()
        .unwrap()
}

fn artifacts(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "timings.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn c7_end_to_end_offline() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut problems = Vec::new();

    let first = run_offline(&out);
    if !first.status.success() {
        problems.push(format!("first run failed: {}", String::from_utf8_lossy(&first.stderr)));
    }
    let snapshot = artifacts(&out);
    let second = run_offline(&out);
    if !second.status.success() {
        problems.push("second run failed".into());
    }
    if artifacts(&out) != snapshot {
        problems.push("artifacts differ between runs".into());
    }

    let read = |name: &str| std::fs::read_to_string(out.join(name)).unwrap_or_default();
    let manifest: serde_json::Value = serde_json::from_str(&read("manifest.json")).unwrap_or_default();
    if manifest["partial"] != false {
        problems.push("manifest flags a partial run".into());
    }
    let stages = manifest["stages"].as_array().cloned().unwrap_or_default();
    if stages.len() != 11 || stages.iter().any(|s| s["status"] == "failed") {
        problems.push(format!("stage records: {stages:?}"));
    }
    for name in ["candidates.json", "selection.json", "taxonomies.json", "quality_report.json", "eval.json"] {
        if serde_json::from_str::<serde_json::Value>(&read(name)).is_err() {
            problems.push(format!("{name} is not valid JSON"));
        }
    }
    let report: serde_json::Value = serde_json::from_str(&read("quality_report.json")).unwrap_or_default();
    let count = report["taxonomy_count"].as_u64().unwrap_or(0);
    let empty = report["structure"]["empty"].as_u64().unwrap_or(u64::MAX);
    if count < 1 || empty != 0 {
        problems.push(format!("{count} taxonomies, {empty} empty"));
    }
    let dot = read("taxonomies.dot");
    if !dot.trim_start().starts_with("digraph") || dot.matches('{').count() != dot.matches('}').count() {
        problems.push("DOT output malformed".into());
    }
    for name in ["nodes.csv", "edges.csv"] {
        let mut rdr = csv::Reader::from_path(out.join(name)).unwrap();
        let width = rdr.headers().unwrap().len();
        if rdr.records().any(|r| r.map_or(true, |r| r.len() != width)) {
            problems.push(format!("{name} has ragged rows"));
        }
    }
    for p in &problems {
        println!("  {p}");
    }
    let (fast, time) = within(Duration::from_secs(60), started);
    verdict(
        7,
        "end-to-end offline run",
        problems.is_empty() && fast,
        &format!("{count} taxonomies, {} problems; {time}", problems.len()),
    );
}

// ---------------------------------------------------------------- 8

fn random_list(rng: &mut ChaCha8Rng) -> Vec<Feature> {
    let words = ["dark", "mode", "voice", "input", "sync"];
    (0..rng.random_range(0..6))
        .map(|_| {
            let len = rng.random_range(1..=4);
            let s: Vec<&str> = (0..len).map(|_| words[rng.random_range(0..words.len())]).collect();
            Feature::new(&s.join(" "), "r", Source::Llm).unwrap()
        })
        .collect()
}

#[test]
fn c8_matching_monotonicity() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut drops, mut asym) = (0, 0);
    for _ in 0..1000 {
        let (p, g) = (random_list(&mut rng), random_list(&mut rng));
        let counts: Vec<usize> = (0..=3).map(|n| align_review(&p, &g, n).len()).collect();
        if counts.windows(2).any(|w| w[1] < w[0]) {
            drops += 1;
        }
        for a in &p {
            for b in &g {
                for n in 0..=3 {
                    if features_match(a.tokens(), b.tokens(), n) != features_match(b.tokens(), a.tokens(), n) {
                        asym += 1;
                    }
                }
            }
        }
    }
    verdict(
        8,
        "matching monotonicity",
        drops == 0 && asym == 0,
        &format!("{drops} count decreases, {asym} asymmetric pairs over 1000 list pairs"),
    );
}

// ---------------------------------------------------------------- 9

/// Hamilton apportionment written out with exact integer remainders.
fn hamilton(counts: &[u64], size: u64) -> Vec<u64> {
    let total: u64 = counts.iter().sum();
    let mut seats: Vec<u64> = counts.iter().map(|c| c * size / total).collect();
    let mut rema: Vec<(u64, u64, usize)> = counts.iter().enumerate().map(|(i, c)| (c * size % total, *c, i)).collect();
    rema.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));
    let left = size - seats.iter().sum::<u64>();
    for &(_, _, i) in rema.iter().take(left as usize) {
        seats[i] += 1;
    }
    seats
}

#[test]
fn c9_stratified_allocation() {
    let counts = [119_892, 26_883, 5_323, 3_818, 1_334, 882, 75];
    let got = allocate(&counts, 2000);
    let oracle = hamilton(&counts, 2000);
    let pinned = vec![1516, 340, 67, 48, 17, 11, 1];
    let sum: u64 = got.iter().sum();
    verdict(
        9,
        "stratified sampling",
        got == oracle && got == pinned && sum == 2000,
        &format!("allocation {got:?}, oracle {oracle:?}, sum {sum}"),
    );
}
