//! Acceptance suite. Each test prints one `ACCEPTANCE <n> PASS|FAIL` line.
//!
//! Criteria 3 and 4 read the official shared-task files when
//! `LEGALNLI_OFFICIAL_DIR` points at a directory holding `test.jsonl`,
//! `train_shared_task.jsonl` and `train_legallens.jsonl` (or `.csv`
//! variants); otherwise they use the bundled fixtures, which have the same
//! row and class counts.

mod common;

use std::collections::BTreeSet;
use std::io::Write;
use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use legalnli::corpus::{
    aggregate_with_stats, class_distribution, load_dataset, Dataset, Format, NliExample, PublishedSplit, Source,
};
use legalnli::eval::{classify_error, confusion, evaluate, metrics, ErrorType};
use legalnli::pairs::build_corpus_pairs;
use legalnli::prompt::{render_prompt, PromptTemplate};
use legalnli::report::{domain_table, emit_confusion_plot, sidecar_path, PlotSidecar, TableFormat};
use legalnli::synthetic::{fixture_test_split, keyword_corpus};
use legalnli::train::{
    orpo_components, orpo_loss, orpo_loss_and_grad, run_pipeline, sft_loss, PlanStage, ReferenceConfig,
    ReferenceTinyModel, StageConfig, StageData, StageName, TrainerBackend, TrainingPlan,
};
use legalnli::{ConfusionMatrix, Label, Strategy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Runs one criterion, reports it on stdout (bypassing capture) and
/// re-raises any failure.
fn criterion(n: u32, title: &str, body: impl FnOnce() -> String) {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(body));
    let elapsed = start.elapsed();
    let line = match &result {
        Ok(detail) => format!("ACCEPTANCE {n:>2} PASS  {title} [{detail}; {elapsed:.2?}]"),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            format!("ACCEPTANCE {n:>2} FAIL  {title} [{}]", msg.lines().next().unwrap_or(""))
        }
    };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
    if let Err(panic) = result {
        resume_unwind(panic);
    }
}

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

/// Official file if `LEGALNLI_OFFICIAL_DIR` has it, else the bundled fixture.
fn data_file(stem: &str) -> (PathBuf, &'static str) {
    if let Some(dir) = std::env::var_os("LEGALNLI_OFFICIAL_DIR") {
        for ext in ["jsonl", "csv"] {
            let p = Path::new(&dir).join(format!("{stem}.{ext}"));
            if p.exists() {
                return (p, "official");
            }
        }
    }
    (manifest_dir().join(format!("tests/fixtures/{stem}.jsonl")), "fixture")
}

fn load(path: &Path) -> Dataset {
    load_dataset(path, Format::from_path(path), Source::Nllp).unwrap()
}

#[test]
fn c01_metric_oracle_equivalence() {
    criterion(1, "metrics agree with a pair-counting oracle on 1000 random vectors", || {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(1024);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let n = rng.gen_range(1..=50);
            let gold: Vec<Label> = (0..n).map(|_| Label::ALL[rng.gen_range(0..3)]).collect();
            let pred: Vec<Label> = (0..n).map(|_| Label::ALL[rng.gen_range(0..3)]).collect();
            let m = metrics(&confusion(&gold, &pred).unwrap());
            let o = common::oracle_metrics(&gold, &pred);
            let mut diffs = vec![
                m.accuracy - o.accuracy,
                m.macro_avg.precision - o.macro_precision,
                m.macro_avg.recall - o.macro_recall,
                m.macro_avg.f1 - o.macro_f1,
                m.weighted.f1 - o.weighted_f1,
            ];
            for (l, c) in Label::ALL.iter().zip(&o.classes) {
                let s = &m.per_class[l];
                diffs.extend([s.precision - c.precision, s.recall - c.recall, s.f1 - c.f1]);
            }
            worst = diffs.iter().fold(worst, |w, d| w.max(d.abs()));
        }
        assert!(worst <= 1e-9, "max deviation {worst:e}");
        let elapsed = start.elapsed();
        assert!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
        format!("max deviation {worst:e}")
    });
}

#[test]
fn c02_worked_example() {
    criterion(2, "worked 10-pair example gives accuracy 0.8 and macro F1 0.7746", || {
        use Label::{Contradict as C, Entailed as E, Neutral as N};
        let gold = [E, E, E, E, N, N, N, N, C, C];
        let pred = [E, E, E, N, N, N, N, N, N, C];
        let m = confusion(&gold, &pred).unwrap();
        assert_eq!(m.counts, [[3, 1, 0], [0, 4, 0], [0, 1, 1]]);
        let block = metrics(&m);
        // by hand: F1_E = 6/7, F1_N = 8/10, F1_C = 2/3
        let expected_macro = (6.0 / 7.0 + 0.8 + 2.0 / 3.0) / 3.0;
        assert!((block.accuracy - 0.8).abs() < 1e-12);
        assert!((block.macro_avg.f1 - 0.7746).abs() < 1e-4, "{}", block.macro_avg.f1);
        assert!((block.macro_avg.f1 - expected_macro).abs() < 1e-12);
        for (l, f) in [(E, 0.8571), (N, 0.8), (C, 0.6667)] {
            assert!((block.per_class[&l].f1 - f).abs() < 1e-4);
        }
        format!("macro F1 {:.6}", block.macro_avg.f1)
    });
}

#[test]
fn c03_test_split_distribution() {
    criterion(3, "test split class distribution matches 47.6/34.5/17.9 %", || {
        let (path, kind) = data_file("test");
        let d = load(&path);
        let dist = class_distribution(&d).unwrap();
        let counts: Vec<u64> = Label::ALL.iter().map(|&l| dist.count(l)).collect();
        assert_eq!(counts, [40, 29, 15]);
        assert_eq!(dist.total(), 84);
        let published = PublishedSplit::Test.distribution();
        for l in Label::ALL {
            let dev = (dist.fraction(l) - published.fraction(l)).abs();
            assert!(dev <= 0.001, "{l}: {} vs {}", dist.fraction(l), published.fraction(l));
        }
        format!("{kind} data, counts {counts:?}")
    });
}

#[test]
fn c04_aggregation() {
    criterion(4, "aggregating the two 312-row training files yields 462 rows", || {
        let (a_path, kind) = data_file("train_shared_task");
        let (b_path, _) = data_file("train_legallens");
        let (a, b) = (load(&a_path), load(&b_path));
        assert_eq!((a.len(), b.len()), (312, 312));
        let (merged, stats) = aggregate_with_stats(&a, &b).unwrap();
        assert_eq!(merged.len(), 462);
        assert_eq!(stats.input_a + stats.input_b - stats.duplicates, 462);
        format!("{kind} data, {} duplicates removed", stats.duplicates)
    });
}

#[test]
fn c05_strategy_exhaustiveness() {
    criterion(5, "rejection strategies hold exhaustively; random rejection is balanced", || {
        let t = PromptTemplate::default();
        let (a, b) = legalnli::synthetic::fixture_training_pair(1024);
        let datasets = [
            fixture_test_split(1024),
            keyword_corpus("k", 900, 5, Source::Nllp, true),
            aggregate_with_stats(&a, &b).unwrap().0,
        ];
        let mut checked = 0;
        for d in &datasets {
            let gold = |id: &str| d.get(id).unwrap().label;

            let preferred = build_corpus_pairs(d, Strategy::PreferredRejection, 1024, &t).unwrap();
            assert_eq!(preferred.len(), d.len());
            for p in preferred.pairs() {
                let g = gold(&p.example_id);
                let r = p.rejected_label().unwrap();
                assert_ne!(r, g);
                if g != Label::Neutral {
                    assert_eq!(r, Label::Neutral);
                }
            }

            let multiple = build_corpus_pairs(d, Strategy::MultipleRejections, 1024, &t).unwrap();
            assert_eq!(multiple.len(), 2 * d.len());
            for group in multiple.groups() {
                let g = gold(&group[0].example_id);
                let rejected: BTreeSet<Label> = group.iter().map(|p| p.rejected_label().unwrap()).collect();
                assert_eq!(rejected, g.others().into_iter().collect::<BTreeSet<_>>());
            }

            let random = build_corpus_pairs(d, Strategy::RandomRejection, 1024, &t).unwrap();
            assert_eq!(random.len(), d.len());
            assert!(random.pairs().iter().all(|p| p.rejected_label() != Some(gold(&p.example_id))));
            let again = build_corpus_pairs(d, Strategy::RandomRejection, 1024, &t).unwrap();
            assert_eq!(random.to_jsonl_string(), again.to_jsonl_string());
            checked += d.len();
        }

        let entailed: Vec<NliExample> = (0..10_000)
            .map(|i| NliExample::new(format!("b{i:05}"), format!("p {i}"), format!("h {i}"), Label::Entailed))
            .collect();
        let d = Dataset::new("entailed", entailed).unwrap();
        let pairs = build_corpus_pairs(&d, Strategy::RandomRejection, 1024, &t).unwrap();
        let neutral = pairs.pairs().iter().filter(|p| p.rejected_label() == Some(Label::Neutral)).count();
        assert!((4700..=5300).contains(&neutral), "{neutral} Neutral rejections");
        format!("{checked} examples checked, {neutral}/10000 Neutral rejections")
    });
}

#[test]
fn c06_orpo_objective() {
    criterion(6, "ORPO reduces to SFT at beta 0, gives log 2 on ties, gradients match", || {
        let start = Instant::now();
        let t = PromptTemplate::default();
        let d = keyword_corpus("g", 30, 9, Source::Nllp, false);
        let pairs = build_corpus_pairs(&d, Strategy::MultipleRejections, 1024, &t).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1024);
        let mut model = ReferenceTinyModel::new(ReferenceConfig {
            hash_buckets: 16,
            ..ReferenceConfig::default()
        });

        // (b) equal probabilities: algebraically and on the uniform zero model
        for p in [1e-6f64, 0.1, 1.0 / 3.0, 0.5, 0.9] {
            let c = orpo_components(p.ln(), p.ln(), 0.1).unwrap();
            assert!((c.odds_ratio_loss - 2f64.ln()).abs() <= 1e-9);
        }
        let pair = &pairs.pairs()[0];
        let tie = orpo_loss(&model, pair, 1.0).unwrap() - sft_loss(&model, &pair.prompt, &pair.chosen).unwrap();
        assert!((tie - 2f64.ln()).abs() <= 1e-9);

        let mut worst = 0.0f64;
        for point in 0..100 {
            let params: Vec<f64> = (0..model.num_params()).map(|_| rng.gen_range(-2.0..2.0)).collect();
            model.set_params(params.clone()).unwrap();
            let pair = &pairs.pairs()[point % pairs.len()];

            // (a) beta = 0 is SFT, bit for bit
            let orpo = orpo_loss(&model, pair, 0.0).unwrap();
            let sft = sft_loss(&model, &pair.prompt, &pair.chosen).unwrap();
            assert_eq!(orpo.to_bits(), sft.to_bits(), "point {point}");

            // (c) central differences
            let beta = 0.1;
            let (_, analytic) = orpo_loss_and_grad(&model, pair, beta).unwrap();
            let mut probe = model.clone();
            const H: f64 = 1e-5;
            for i in 0..params.len() {
                let mut p = params.clone();
                p[i] += H;
                probe.set_params(p.clone()).unwrap();
                let up = orpo_loss(&probe, pair, beta).unwrap();
                p[i] -= 2.0 * H;
                probe.set_params(p).unwrap();
                let down = orpo_loss(&probe, pair, beta).unwrap();
                let numeric = (up - down) / (2.0 * H);
                let scale = analytic[i].abs().max(numeric.abs());
                if scale > 1e-8 {
                    let rel = (analytic[i] - numeric).abs() / scale;
                    assert!(rel <= 1e-4, "point {point} param {i}: {} vs {numeric}", analytic[i]);
                    worst = worst.max(rel);
                }
            }
        }
        let elapsed = start.elapsed();
        assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
        format!("max relative gradient error {worst:.2e}")
    });
}

/// Learning rate from the shipped reference-backend config.
fn reference_learning_rate(stage: &str) -> f64 {
    let text = std::fs::read_to_string(manifest_dir().join("../../configs/reference.toml")).unwrap();
    let value: toml::Value = toml::from_str(&text).unwrap();
    value["train"][stage]["learning_rate"].as_float().unwrap()
}

#[test]
fn c07_toy_pipeline() {
    criterion(7, "two-stage toy run reaches macro F1 >= 0.95 with no Type-1 errors", || {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        pool.install(|| {
            let start = Instant::now();
            let t = PromptTemplate::default();
            let generic = keyword_corpus("generic", 600, 1, Source::Snli, false);
            let legal = keyword_corpus("legal", 600, 2, Source::Nllp, true);
            let test = keyword_corpus("test", 150, 3, Source::Nllp, true);

            let mut s1 = StageConfig::default_for(StageName::Stage1GenericNli);
            s1.learning_rate = reference_learning_rate("stage1");
            let mut s2 = StageConfig::default_for(StageName::Stage2Legal);
            s2.learning_rate = reference_learning_rate("stage2");
            assert_eq!((s1.epochs, s2.epochs), (1, 3));
            let pairs = build_corpus_pairs(&legal, Strategy::PreferredRejection, 1024, &t).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let plan = TrainingPlan::new(
                vec![
                    PlanStage { config: s1, data: StageData::Examples(generic) },
                    PlanStage { config: s2, data: StageData::Pairs(pairs) },
                ],
                t.clone(),
                dir.path(),
            )
            .unwrap();
            let mut model = ReferenceTinyModel::new(ReferenceConfig::default());
            run_pipeline(&plan, &mut model).unwrap();

            let gold: Vec<Label> = test.iter().map(|e| e.label).collect();
            let pred: Vec<Label> = test
                .iter()
                .map(|e| model.predict_label(&render_prompt(e, &t).unwrap()))
                .collect();
            let domains: Vec<Option<String>> = test.iter().map(|e| e.domain.clone()).collect();
            let report = evaluate(&gold, &pred, &domains, 0, Label::Neutral).unwrap();
            let elapsed = start.elapsed();
            assert!(report.macro_f1() >= 0.95, "macro F1 {}", report.macro_f1());
            assert_eq!(report.error_counts.type1, 0);
            assert!(elapsed < Duration::from_secs(300), "took {elapsed:?}");
            format!("macro F1 {:.4}, Type-1 {}", report.macro_f1(), report.error_counts.type1)
        })
    });
}

#[test]
fn c08_error_typology() {
    criterion(8, "error typology: 2 Type-1, 4 Type-2, 3 Correct cells", || {
        let (mut t1, mut t2, mut ok) = (0, 0, 0);
        for g in Label::ALL {
            for p in Label::ALL {
                let expected = if g == p {
                    ErrorType::Correct
                } else if g != Label::Neutral && p != Label::Neutral {
                    ErrorType::Type1
                } else {
                    ErrorType::Type2
                };
                let got = classify_error(g, p);
                assert_eq!(got, expected, "({g}, {p})");
                match got {
                    ErrorType::Type1 => t1 += 1,
                    ErrorType::Type2 => t2 += 1,
                    ErrorType::Correct => ok += 1,
                }
            }
        }
        assert_eq!((t1, t2, ok), (2, 4, 3));
        format!("{t1}/{t2}/{ok}")
    });
}

#[test]
fn c09_report_formats() {
    criterion(9, "domain table layout and plot sidecars", || {
        let test = fixture_test_split(1024);
        let gold: Vec<Label> = test.iter().map(|e| e.label).collect();
        // deterministic imperfect predictor: every fifth example shifted one class
        let pred: Vec<Label> = gold
            .iter()
            .enumerate()
            .map(|(i, &l)| if i % 5 == 0 { Label::from_index((l.index() + 1) % 3).unwrap() } else { l })
            .collect();
        let domains: Vec<Option<String>> = test.iter().map(|e| e.domain.clone()).collect();
        let report = evaluate(&gold, &pred, &domains, 0, Label::Neutral).unwrap();
        let table = domain_table(&report, TableFormat::Markdown, "run_manifest.report.json");
        let rows: Vec<Vec<String>> = table
            .lines()
            .filter(|l| l.starts_with('|'))
            .map(|l| l.trim_matches('|').split('|').map(|c| c.trim().to_string()).collect())
            .collect();
        assert_eq!(rows[0], ["Domain", "support", "A", "P", "R", "F1"]);
        let body = &rows[2..];
        let names: Vec<&str> = body.iter().map(|r| r[0].as_str()).collect();
        assert_eq!(names, ["BIPA", "Consumer", "Data-Breach", "TCPA", "VPPA", "WAGE", "Overall"]);
        let supports: Vec<&str> = body.iter().map(|r| r[1].as_str()).collect();
        assert_eq!(supports, ["22", "8", "20", "9", "6", "19", "84"]);
        for row in body {
            for cell in &row[2..] {
                assert!(cell.len() == 4 && cell.as_bytes()[1] == b'.', "cell {cell:?}");
            }
        }
        let overall = body.last().unwrap();
        assert_eq!(overall[5], format!("{:.2}", report.macro_f1()));

        let dir = tempfile::tempdir().unwrap();
        let matrices = [report.matrix, ConfusionMatrix { counts: [[5, 0, 0], [0, 7, 0], [0, 0, 2]] }];
        for (i, m) in matrices.iter().enumerate() {
            for ext in ["svg", "png"] {
                let path = dir.path().join(format!("cm{i}.{ext}"));
                emit_confusion_plot(m, &path, "run_manifest.report.json").unwrap();
                let sidecar: PlotSidecar =
                    serde_json::from_str(&std::fs::read_to_string(sidecar_path(&path)).unwrap()).unwrap();
                assert_eq!(sidecar.counts, m.counts);
                assert_eq!(sidecar.labels, Label::ALL.to_vec());
            }
        }
        format!("{} domain rows + Overall", body.len() - 1)
    });
}

fn run_cli(dir: &Path, args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_legalnli"))
        .args(args)
        .current_dir(dir)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .env_remove("LEGALNLI_HOME")
        .output()
        .unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

/// Every file under `dir`, relative path to bytes.
fn tree(dir: &Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut std::collections::BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = std::collections::BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

#[test]
fn c10_cli_determinism() {
    criterion(10, "two full CLI runs produce identical JSON artifacts and parameters", || {
        let fixtures = manifest_dir().join("tests/fixtures");
        let config = manifest_dir().join("../../configs/reference.toml");
        let config = config.to_str().unwrap();
        let runs: Vec<_> = (0..2)
            .map(|_| {
                let dir = tempfile::tempdir().unwrap();
                let d = dir.path();
                keyword_corpus("generic", 600, 1, Source::Snli, false).write_jsonl(&d.join("s1.jsonl")).unwrap();
                keyword_corpus("legal", 600, 2, Source::Nllp, true).write_jsonl(&d.join("s2.jsonl")).unwrap();
                keyword_corpus("test", 150, 3, Source::Nllp, true).write_jsonl(&d.join("test.jsonl")).unwrap();
                for f in ["train_shared_task.jsonl", "train_legallens.jsonl"] {
                    std::fs::copy(fixtures.join(f), d.join(f)).unwrap();
                }
                let seed = ["--seed", "1024", "--config", config];
                let steps: [&[&str]; 7] = [
                    &["aggregate", "train_shared_task.jsonl", "train_legallens.jsonl", "-o", "out/merged.jsonl"],
                    &["build-pairs", "out/merged.jsonl", "-o", "out/pairs.jsonl", "--strategy", "random"],
                    &["validate-split", "test.jsonl", "--expected", "0.334,0.333,0.333", "--tolerance", "0.01", "-o", "out/split.json"],
                    &["train", "--stage1", "s1.jsonl", "--stage2", "s2.jsonl", "-o", "out/run"],
                    &["predict", "--checkpoint", "out/run", "--data", "test.jsonl", "-o", "out/preds.jsonl"],
                    &["evaluate", "--gold", "test.jsonl", "--pred", "out/preds.jsonl", "-o", "out/eval"],
                    &["report", "--report", "out/eval/report.json", "--plot", "confusion.png"],
                ];
                for step in steps {
                    let args: Vec<&str> = seed.iter().chain(step.iter()).copied().collect();
                    run_cli(d, &args);
                }
                let files = tree(&d.join("out"));
                (dir, files)
            })
            .collect();
        let (a, b) = (&runs[0].1, &runs[1].1);
        assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
        let mut compared = 0;
        for (name, bytes) in a {
            if name.ends_with(".json") || name.ends_with(".jsonl") || name.ends_with(".bin") {
                assert!(bytes == &b[name], "{name} differs between runs");
                compared += 1;
            }
        }
        assert!(a.contains_key("run/stage2-Stage2_Legal/params.bin"));
        format!("{compared} JSON and parameter files identical")
    });
}
