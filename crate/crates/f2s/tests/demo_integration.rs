//! Runs the full pipeline against the generated demo fixture and checks
//! every outcome the manifest promises: the mining funnel, per-problem
//! stages, style-dataset shape, and per-direction accuracy.

use f2s::config::PipelineConfig;
use f2s::corpus::{load_corpus, Language};
use f2s::demo::{
    generate_demo, CA_CORPUS_FILE, CONFIG_FILE, CORPUS_FILE, FIXTURES_FILE, TRANSLATIONS_FILE,
};
use f2s::gateway::{MockFixtures, MockGateway};
use f2s::pipeline::{load_translations, Pipeline};

#[test]
fn demo_drives_designed_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = generate_demo(dir.path()).unwrap();

    let config = PipelineConfig::load(Some(&dir.path().join(CONFIG_FILE))).unwrap();
    let fixtures =
        MockFixtures::load(&config.resolve(dir.path().join(FIXTURES_FILE).as_path())).unwrap();
    let gateway = MockGateway::new(config.seed).with_fixtures(fixtures);
    let pipeline = Pipeline::new(config, &gateway).unwrap();

    let corpus = load_corpus(&dir.path().join(CORPUS_FILE)).unwrap();
    let out = dir.path().join("out");

    let function = pipeline
        .build_function_data(&corpus, Language::Python, Language::C, &out)
        .unwrap();
    assert_eq!(function.summary, manifest.function.summary);
    for outcome in &function.problems {
        assert_eq!(
            outcome.stage, manifest.function.stages[&outcome.problem_id],
            "stage mismatch for {}",
            outcome.problem_id
        );
        if outcome.stage == f2s::pipeline::FunnelStage::Exported {
            let score = outcome.score.unwrap();
            assert!(
                (score - manifest.function.judge_accept_score).abs() < 1e-9,
                "accept score {score}"
            );
        }
    }

    let style = pipeline
        .build_style_data(&corpus, Language::C, Language::Python, &out)
        .unwrap();
    assert_eq!(style.summary.records, manifest.style.records);
    assert_eq!(style.summary.ineligible, manifest.style.ineligible);
    assert_eq!(style.summary.generated_total, manifest.style.generated_total);
    assert_eq!(style.summary.functional_total, manifest.style.functional_total);
    for p in &style.problems {
        if p.ineligible_reason.is_none() {
            assert_eq!(p.negatives_kept, manifest.style.negatives_per_record);
            assert_eq!(p.chosen_index, Some(0), "{}", p.problem_id);
        }
    }

    let ca_corpus = load_corpus(&dir.path().join(CA_CORPUS_FILE)).unwrap();
    let rows = load_translations(&dir.path().join(TRANSLATIONS_FILE)).unwrap();
    let ca = pipeline.eval_ca(&ca_corpus, &rows, &out).unwrap();
    assert_eq!(ca.directions.len(), 3);
    for (direction, expected) in ca.directions.iter().zip(&manifest.ca.per_direction) {
        assert_eq!(direction.src_lang, expected.src_lang);
        assert_eq!(direction.summary.total, expected.total);
        assert_eq!(direction.summary.pass, expected.pass);
        assert!((direction.summary.ca - expected.ca).abs() < 1e-12);
    }
    let totals = &manifest.ca.category_totals;
    assert_eq!(ca.overall.compile_error, totals.compile_error);
    assert_eq!(ca.overall.runtime_error, totals.runtime_error);
    assert_eq!(ca.overall.timeout, totals.timeout);
    assert_eq!(ca.overall.incorrect_output, totals.incorrect_output);
    assert_eq!(ca.overall.missing, totals.missing);
}
