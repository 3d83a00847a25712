//! Self-contained offline demo data generator.
//!
//! `generate_demo` writes everything needed to run every command without a
//! network or a live model endpoint: a synthetic corpus, mock-gateway
//! fixtures, a config wired to those fixtures, a translation fixture for
//! accuracy evaluation, and a manifest recording the outcomes the fixture is
//! constructed to produce.
//!
//! The manifest is written from the *design*, not from running the pipeline:
//! the funnel counts, per-problem stages, dataset sizes, and accuracy figures
//! below are traced by hand from the fixture's construction rules. Tests then
//! run the real pipeline against the fixture and compare. Where an outcome
//! depends on a quantity that is awkward to predict on paper (style-distance
//! margins), the generator measures it and fails loudly rather than writing a
//! fixture that only usually works.
//!
//! Fixture design, briefly:
//!
//! * 20 problems `d01..d20`, each computing `a*n + b` for small per-problem
//!   constants. 18 have a Python solution (the pair-mining source side); all
//!   20 have a C solution (the candidate pool).
//! * Judge fixtures accept exactly the own-problem pair for `d01..d16` and
//!   reject everything else, so mining funnels 20 → 18 → 16 → 14 → 14:
//!   `d19`/`d20` lack a source, `d17`/`d18` are judge-rejected, `d15`'s C
//!   program prints a wrong value and `d16`'s aborts, so both fail
//!   differential testing.
//! * Style fixtures (C → Python) give 16 of the remaining problems three
//!   functional candidates (two stylistic twins plus one divergent sibling)
//!   and ten negatives, of which exactly seven sit clearly below the style
//!   threshold. `d19` gets no fixture (nothing functional is generated),
//!   `d20`'s negatives all equal the positive (nothing below the threshold),
//!   and `d16`'s source aborts before generation, leaving 17 records.
//! * The accuracy fixture is a second 10-problem corpus with pinned expected
//!   outputs and 29 translations across three directions, each direction
//!   passing exactly 7 of 10 (one row per direction is a compile error, a
//!   runtime error, a timeout, a wrong answer, or simply missing).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{PipelineConfig, Templates};
use crate::corpus::{
    export_corpus, CodeSnippet, CorpusError, Language, Origin, Problem, TestCase,
};
use crate::gateway::{GatewayError, MockFixtures, MockGateway};
use crate::pipeline::{write_json, FunnelStage, FunnelSummary, TranslationRow};
use crate::prompt::{judge_template_for_k, PromptError};
use crate::styledist::{build_idf, cssim, StyleError};

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const CA_CORPUS_FILE: &str = "ca_corpus.jsonl";
pub const TRANSLATIONS_FILE: &str = "translations.jsonl";
pub const FIXTURES_FILE: &str = "mock_fixtures.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Style threshold used by the demo (the library default, restated here
/// because the fixture's margins are checked against it at generation time).
const DEMO_ALPHA: f64 = 0.8;
/// Safety margin: designed negatives must clear the threshold by this much.
const ALPHA_MARGIN: f64 = 0.02;

const PROBLEMS: usize = 20;
/// 1-based problem indices with special roles.
const WRONG_OUTPUT: usize = 15;
const CRASHING: usize = 16;
const JUDGE_REJECTED: [usize; 2] = [17, 18];
const NO_PY_SOURCE: [usize; 2] = [19, 20];

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    /// A designed outcome did not hold when measured (e.g. a "divergent"
    /// negative landed too close to the style threshold).
    #[error("fixture self-check failed: {0}")]
    SelfCheck(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Style(#[from] StyleError),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
}

// ---------------------------------------------------------------------------
// Manifest: what the fixture is built to produce
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionExpectation {
    pub src_lang: Language,
    pub tgt_lang: Language,
    pub summary: FunnelSummary,
    /// Judge score of every accepted pair (logits put weight 9 on the top
    /// label and 1 elsewhere: (1+2+3+4+9*5)/13).
    pub judge_accept_score: f64,
    /// Judge score of every rejected pairing (weight 9 on the bottom label).
    pub judge_reject_score: f64,
    /// Expected funnel stage per problem id.
    pub stages: BTreeMap<String, FunnelStage>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StyleExpectation {
    pub src_lang: Language,
    pub tgt_lang: Language,
    pub alpha: f64,
    pub records: usize,
    /// Every record keeps exactly n negatives.
    pub negatives_per_record: usize,
    pub generated_total: usize,
    pub functional_total: usize,
    /// Ineligibility histogram: reason → problem count.
    pub ineligible: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaDirectionExpectation {
    pub src_lang: String,
    pub tgt_lang: Language,
    pub total: usize,
    pub pass: usize,
    pub ca: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaCategoryTotals {
    pub compile_error: usize,
    pub runtime_error: usize,
    pub timeout: usize,
    pub incorrect_output: usize,
    pub missing: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaExpectation {
    pub per_direction: Vec<CaDirectionExpectation>,
    pub overall_ca: f64,
    pub category_totals: CaCategoryTotals,
}

/// Everything a test needs to verify a demo run without re-deriving the
/// fixture's construction rules.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DemoManifest {
    pub function: FunctionExpectation,
    pub style: StyleExpectation,
    pub ca: CaExpectation,
}

// ---------------------------------------------------------------------------
// Program builders
// ---------------------------------------------------------------------------

/// Per-problem coefficients for `a*n + b`; distinct for every i in 1..=20.
fn formula(i: usize) -> (i64, i64) {
    ((i % 5) as i64 + 2, (i % 4) as i64)
}

/// What problem i's C program actually computes: d15 is off by one.
fn c_shift(i: usize) -> i64 {
    let (_, b) = formula(i);
    if i == WRONG_OUTPUT {
        b + 1
    } else {
        b
    }
}

fn problem_id(i: usize) -> String {
    format!("d{i:02}")
}

fn python_solution(i: usize) -> CodeSnippet {
    let (a, b) = formula(i);
    CodeSnippet::new(
        format!("d{i:02}-py"),
        Language::Python,
        format!("n = int(input())\nprint(n * {a} + {b})\n"),
        Origin::Manual,
    )
    .expect("demo snippet is well-formed")
}

fn c_solution(i: usize) -> CodeSnippet {
    let (a, _) = formula(i);
    let body = if i == CRASHING {
        "#include <stdio.h>\n#include <stdlib.h>\n\nint main(void) {\n    int n;\n    if (scanf(\"%d\", &n) != 1) {\n        return 1;\n    }\n    abort();\n}\n"
            .to_string()
    } else {
        format!(
            "#include <stdio.h>\n\nint main(void) {{\n    int n;\n    if (scanf(\"%d\", &n) != 1) {{\n        return 1;\n    }}\n    printf(\"%d\\n\", n * {a} + {b});\n    return 0;\n}}\n",
            b = c_shift(i)
        )
    };
    CodeSnippet::new(format!("d{i:02}-c"), Language::C, body, Origin::Manual)
        .expect("demo snippet is well-formed")
}

fn demo_problem(i: usize) -> Problem {
    let mut solutions = Vec::new();
    if !NO_PY_SOURCE.contains(&i) {
        solutions.push(python_solution(i));
    }
    solutions.push(c_solution(i));
    Problem {
        problem_id: problem_id(i),
        tests: vec![
            TestCase::from_input(b"3\n".as_slice()),
            TestCase::from_input(b"10\n".as_slice()),
        ],
        solutions,
        meta: serde_json::Map::new(),
    }
}

/// The six style-aware completions for problem i, ordered so the functional
/// trio comes first. Candidates 0 and 1 are stylistic twins (one variable
/// renamed); candidate 2 is functionally equal but structurally divergent and
/// shares candidate 0's variable name, which pulls the consensus to index 0.
/// Candidates 3..6 compute a wrong value and fall out of the functional set.
fn positive_completions(i: usize) -> Vec<String> {
    let (a, _) = formula(i);
    let b = c_shift(i);
    vec![
        format!("value = int(input())\nprint(value * {a} + {b})\n"),
        format!("num = int(input())\nprint(num * {a} + {b})\n"),
        format!("value = int(input())\nresult = value * {a} + {b}\nprint(result)\n"),
        format!("x = int(input())\nprint(x * {a} + {b} + 7)\n"),
        format!("y = int(input())\nprint(y * {a} + {b} + 8)\n"),
        format!("z = int(input())\nprint(z * {a} + {b} + 9)\n"),
    ]
}

/// Seven translations that abandon the positive's style: different
/// identifiers and different program shapes. All still compute `a*n + b`.
fn divergent_negatives(i: usize) -> Vec<String> {
    let (a, _) = formula(i);
    let b = c_shift(i);
    vec![
        format!(
            "import sys\n\n\ndef main():\n    tokens = sys.stdin.read().split()\n    number = int(tokens[0])\n    sys.stdout.write(str(number * {a} + {b}) + \"\\n\")\n\n\nif __name__ == \"__main__\":\n    main()\n"
        ),
        format!(
            "def scaled(item):\n    return item * {a} + {b}\n\n\nraw = input()\nprint(scaled(int(raw)))\n"
        ),
        format!(
            "amount = int(input())\ntotal = {b}\nfor _ in range({a}):\n    total += amount\nprint(total)\n"
        ),
        format!(
            "import sys\n\nfigures = [int(chunk) for chunk in sys.stdin.read().split()]\nanswers = [entry * {a} + {b} for entry in figures[:1]]\nprint(answers[0])\n"
        ),
        format!(
            "class Scaler:\n    def __init__(self, factor, offset):\n        self.factor = factor\n        self.offset = offset\n\n    def apply(self, operand):\n        return operand * self.factor + self.offset\n\n\nprint(Scaler({a}, {b}).apply(int(input())))\n"
        ),
        format!(
            "reading = input()\nparsed = int(reading)\nscaled_total = parsed * {a}\nshifted_total = scaled_total + {b}\nprint(shifted_total)\n"
        ),
        format!(
            "import functools\n\ncombine = functools.reduce\nsource_line = input()\nquantity = int(source_line)\nprint(combine(lambda acc, _: acc + quantity, range({a}), {b}))\n"
        ),
    ]
}

/// Ten negative-generation completions: seven divergent, then three copies of
/// the consensus positive (style-identical, so they land above the threshold
/// and are discarded). `d20` inverts the mix — all ten identical — to
/// demonstrate a problem with nothing below the threshold.
fn negative_completions(i: usize) -> Vec<String> {
    let identical = positive_completions(i)[0].clone();
    if i == 20 {
        return vec![identical; 10];
    }
    let mut out = divergent_negatives(i);
    out.extend([identical.clone(), identical.clone(), identical]);
    out
}

// ---------------------------------------------------------------------------
// Prompt keys
// ---------------------------------------------------------------------------

fn judge_prompt(
    templates: &Templates,
    src: &CodeSnippet,
    tgt: &CodeSnippet,
) -> Result<String, DemoError> {
    Ok(judge_template_for_k(&templates.judge, 5).render_required(
        &[
            ("SOURCE_LANG", src.language.display_name()),
            ("TARGET_LANG", tgt.language.display_name()),
            ("SOURCE_CODE", &src.source_text),
            ("TARGET_CODE", &tgt.source_text),
        ],
        &["SOURCE_CODE", "TARGET_CODE"],
    )?)
}

fn generation_prompt(
    template: &crate::prompt::PromptTemplate,
    src: &CodeSnippet,
    tgt_lang: Language,
) -> Result<String, DemoError> {
    Ok(template.render_required(
        &[
            ("SOURCE_LANG", src.language.display_name()),
            ("TARGET_LANG", tgt_lang.display_name()),
            ("SOURCE_CODE", &src.source_text),
        ],
        &["SOURCE_CODE"],
    )?)
}

fn accept_logits() -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    for label in 1..=4 {
        m.insert(label.to_string(), 0.0);
    }
    m.insert("5".to_string(), 9f64.ln());
    m
}

fn reject_logits() -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    m.insert("1".to_string(), 9f64.ln());
    for label in 2..=5 {
        m.insert(label.to_string(), 0.0);
    }
    m
}

// ---------------------------------------------------------------------------
// Accuracy-evaluation fixture
// ---------------------------------------------------------------------------

fn ca_factor(i: usize) -> i64 {
    (i + 1) as i64
}

fn ca_problem(i: usize) -> Problem {
    let m = ca_factor(i);
    Problem {
        problem_id: format!("q{i:02}"),
        tests: vec![
            TestCase::with_expected(b"2\n".as_slice(), format!("{}\n", 2 * m).into_bytes()),
            TestCase::with_expected(b"5\n".as_slice(), format!("{}\n", 5 * m).into_bytes()),
        ],
        solutions: Vec::new(),
        meta: serde_json::Map::new(),
    }
}

fn py_correct(i: usize) -> String {
    format!("n = int(input())\nprint(n * {})\n", ca_factor(i))
}

fn c_correct(i: usize) -> String {
    format!(
        "#include <stdio.h>\n\nint main(void) {{\n    int n;\n    if (scanf(\"%d\", &n) != 1) {{\n        return 1;\n    }}\n    printf(\"%d\\n\", n * {});\n    return 0;\n}}\n",
        ca_factor(i)
    )
}

fn translation_rows() -> Vec<TranslationRow> {
    let row = |dir: &str, src: Language, i: usize, lang: Language, text: String| TranslationRow {
        problem_id: format!("q{i:02}"),
        src_lang: Some(src),
        snippet: CodeSnippet::new(format!("ca-{dir}-q{i:02}"), lang, text, Origin::Generated)
            .expect("demo snippet is well-formed"),
    };
    let mut rows = Vec::new();

    // Direction 1 (label c → python): 7 pass, compile error, runtime error,
    // wrong answer.
    for i in 1..=7 {
        rows.push(row("c2py", Language::C, i, Language::Python, py_correct(i)));
    }
    rows.push(row(
        "c2py",
        Language::C,
        8,
        Language::Python,
        "def broken(:\n".to_string(),
    ));
    rows.push(row(
        "c2py",
        Language::C,
        9,
        Language::Python,
        "n = int(input())\nprint(n // 0)\n".to_string(),
    ));
    rows.push(row(
        "c2py",
        Language::C,
        10,
        Language::Python,
        "n = int(input())\nprint(n * 1000)\n".to_string(),
    ));

    // Direction 2 (label cpp → python): 7 pass, timeout, compile error, and
    // q10 deliberately absent (missing translations count as wrong).
    for i in 1..=7 {
        rows.push(row(
            "cpp2py",
            Language::Cpp,
            i,
            Language::Python,
            py_correct(i),
        ));
    }
    rows.push(row(
        "cpp2py",
        Language::Cpp,
        8,
        Language::Python,
        "import time\n\nn = int(input())\ntime.sleep(30)\nprint(n)\n".to_string(),
    ));
    rows.push(row(
        "cpp2py",
        Language::Cpp,
        9,
        Language::Python,
        "class Incomplete(\n".to_string(),
    ));

    // Direction 3 (label python → c): 7 pass, compile error, runtime error,
    // wrong answer.
    for i in 1..=7 {
        rows.push(row("py2c", Language::Python, i, Language::C, c_correct(i)));
    }
    rows.push(row(
        "py2c",
        Language::Python,
        8,
        Language::C,
        "#include <stdio.h>\n\nint main(void) {\n    int n\n    scanf(\"%d\", &n);\n    return 0;\n}\n"
            .to_string(),
    ));
    rows.push(row(
        "py2c",
        Language::Python,
        9,
        Language::C,
        format!(
            "#include <stdio.h>\n\nint main(void) {{\n    int n;\n    if (scanf(\"%d\", &n) != 1) {{\n        return 1;\n    }}\n    printf(\"%d\\n\", n * {});\n    return 3;\n}}\n",
            ca_factor(9)
        ),
    ));
    rows.push(row(
        "py2c",
        Language::Python,
        10,
        Language::C,
        format!(
            "#include <stdio.h>\n\nint main(void) {{\n    int n;\n    if (scanf(\"%d\", &n) != 1) {{\n        return 1;\n    }}\n    printf(\"%d\\n\", n * {} + 1);\n    return 0;\n}}\n",
            ca_factor(10)
        ),
    ));
    rows
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

fn demo_config() -> PipelineConfig {
    let mut config = PipelineConfig {
        seed: 7,
        ..PipelineConfig::default()
    };
    // All 20 candidates must reach the judge: the mock embedder's notion of
    // similarity is arbitrary, so a narrower recall could drop the intended
    // counterpart and break the designed funnel.
    config.judge.recall_k = PROBLEMS;
    config.style.m = 6;
    config.style.n = 5;
    // Short executions keep the deliberate-timeout fixture rows cheap.
    config.limits.wall_time_secs = 2;
    config.gateway.mock_fixtures = Some(FIXTURES_FILE.into());
    config
}

fn build_fixtures(problems: &[Problem], templates: &Templates) -> Result<MockFixtures, DemoError> {
    let mut fixtures = MockFixtures::default();

    // Judge verdict for every (python source, C candidate) combination.
    let sources: Vec<&CodeSnippet> = problems
        .iter()
        .flat_map(|p| p.solutions_in(Language::Python))
        .collect();
    let candidates: Vec<&CodeSnippet> = problems
        .iter()
        .flat_map(|p| p.solutions_in(Language::C))
        .collect();
    for src in &sources {
        let src_problem = src.snippet_id.trim_end_matches("-py");
        for tgt in &candidates {
            let tgt_problem = tgt.snippet_id.trim_end_matches("-c");
            let own_pair = src_problem == tgt_problem;
            let idx: usize = src_problem[1..].parse().expect("demo id is d<NN>");
            let accepted = own_pair && !JUDGE_REJECTED.contains(&idx);
            let logits = if accepted {
                accept_logits()
            } else {
                reject_logits()
            };
            fixtures
                .label_logits
                .insert(MockGateway::labels_key(&judge_prompt(templates, src, tgt)?), logits);
        }
    }

    // Style generations keyed by the C source. d16 aborts before generation
    // and d19 is left unfixtured so the mock synthesizes placeholder text
    // that cannot pass the tests.
    for problem in problems {
        let Some(c_src) = problem.solutions_in(Language::C).next() else {
            continue;
        };
        let idx: usize = problem.problem_id[1..].parse().expect("demo id is d<NN>");
        if idx == CRASHING || idx == 19 {
            continue;
        }
        let style_prompt = generation_prompt(&templates.style_aware, c_src, Language::Python)?;
        fixtures.completions.insert(
            MockGateway::completion_key(&style_prompt),
            positive_completions(idx),
        );
        let translation_prompt =
            generation_prompt(&templates.translation, c_src, Language::Python)?;
        fixtures.completions.insert(
            MockGateway::completion_key(&translation_prompt),
            negative_completions(idx),
        );
    }
    Ok(fixtures)
}

/// Measures the style margins the fixture depends on, with the same name
/// weighting the pipeline will use (frequencies over the whole corpus).
fn self_check_style(problems: &[Problem]) -> Result<(), DemoError> {
    let all_solutions: Vec<CodeSnippet> = problems
        .iter()
        .flat_map(|p| p.solutions.iter())
        .cloned()
        .collect();
    let idf = build_idf(&all_solutions);

    for problem in problems {
        let idx: usize = problem.problem_id[1..].parse().expect("demo id is d<NN>");
        if idx == CRASHING || idx == 19 {
            continue;
        }
        let snippet = |tag: &str, text: &str| {
            CodeSnippet::new(
                format!("{}-check-{tag}", problem.problem_id),
                Language::Python,
                text,
                Origin::Generated,
            )
            .expect("demo snippet is well-formed")
        };
        let completions = positive_completions(idx);
        let trio: Vec<CodeSnippet> = completions[..3]
            .iter()
            .enumerate()
            .map(|(j, text)| snippet(&format!("pos{j}"), text))
            .collect();

        // The designed consensus winner is candidate 0: it must beat both
        // alternatives on summed similarity, with margin.
        let sim = |x: &CodeSnippet, y: &CodeSnippet| -> Result<f64, DemoError> {
            Ok(cssim(x, y, &idf)?.cssim)
        };
        let s_ab = sim(&trio[0], &trio[1])?;
        let s_ac = sim(&trio[0], &trio[2])?;
        let s_bc = sim(&trio[1], &trio[2])?;
        let sums = [s_ab + s_ac, s_ab + s_bc, s_ac + s_bc];
        for (j, sum) in sums.iter().enumerate().skip(1) {
            if sums[0] <= sum + 0.01 {
                return Err(DemoError::SelfCheck(format!(
                    "{}: consensus margin too thin: candidate 0 sums {:.4}, candidate {j} sums {sum:.4}",
                    problem.problem_id, sums[0]
                )));
            }
        }

        // Divergent negatives must clear the threshold with margin; the
        // identical copies must sit exactly at similarity 1.
        for (j, text) in divergent_negatives(idx).iter().enumerate() {
            let value = sim(&snippet(&format!("neg{j}"), text), &trio[0])?;
            if value >= DEMO_ALPHA - ALPHA_MARGIN {
                return Err(DemoError::SelfCheck(format!(
                    "{}: negative {j} landed at cssim {value:.4}, too close to the {DEMO_ALPHA} threshold",
                    problem.problem_id
                )));
            }
        }
        let identical = sim(&snippet("twin", &completions[0]), &trio[0])?;
        if identical != 1.0 {
            return Err(DemoError::SelfCheck(format!(
                "{}: identical negative scored {identical} instead of 1.0",
                problem.problem_id
            )));
        }
    }
    Ok(())
}

fn manifest() -> DemoManifest {
    let mut stages = BTreeMap::new();
    for i in 1..=PROBLEMS {
        let stage = if NO_PY_SOURCE.contains(&i) {
            FunnelStage::NoSourceSolution
        } else if JUDGE_REJECTED.contains(&i) {
            FunnelStage::JudgeRejected
        } else if i == WRONG_OUTPUT || i == CRASHING {
            FunnelStage::DifftestFailed
        } else {
            FunnelStage::Exported
        };
        stages.insert(problem_id(i), stage);
    }

    let mut ineligible = BTreeMap::new();
    ineligible.insert("source_failed".to_string(), 1); // d16 aborts
    ineligible.insert("no_functional_candidate".to_string(), 1); // d19 unfixtured
    ineligible.insert("no_negatives_below_alpha".to_string(), 1); // d20 all-identical

    DemoManifest {
        function: FunctionExpectation {
            src_lang: Language::Python,
            tgt_lang: Language::C,
            summary: FunnelSummary {
                problems: 20,
                paired: 18,
                judge_filtered: 16,
                difftest_passed: 14,
                exported: 14,
            },
            judge_accept_score: 55.0 / 13.0,
            judge_reject_score: 23.0 / 13.0,
            stages,
        },
        style: StyleExpectation {
            src_lang: Language::C,
            tgt_lang: Language::Python,
            alpha: DEMO_ALPHA,
            records: 17,
            negatives_per_record: 5,
            // 19 problems reach generation (all but the aborting source),
            // six candidates each; 18 of those have fixtured candidates of
            // which three pass the tests.
            generated_total: 19 * 6,
            functional_total: 18 * 3,
            ineligible,
        },
        ca: CaExpectation {
            per_direction: vec![
                CaDirectionExpectation {
                    src_lang: "c".to_string(),
                    tgt_lang: Language::Python,
                    total: 10,
                    pass: 7,
                    ca: 0.7,
                },
                CaDirectionExpectation {
                    src_lang: "cpp".to_string(),
                    tgt_lang: Language::Python,
                    total: 10,
                    pass: 7,
                    ca: 0.7,
                },
                CaDirectionExpectation {
                    src_lang: "python".to_string(),
                    tgt_lang: Language::C,
                    total: 10,
                    pass: 7,
                    ca: 0.7,
                },
            ],
            overall_ca: 0.7,
            category_totals: CaCategoryTotals {
                compile_error: 3,
                runtime_error: 2,
                timeout: 1,
                incorrect_output: 3,
                missing: 1,
            },
        },
    }
}

/// Writes the complete demo fixture into `dir` and returns the manifest.
pub fn generate_demo(dir: &Path) -> Result<DemoManifest, DemoError> {
    std::fs::create_dir_all(dir).map_err(|source| DemoError::Io {
        context: format!("creating {}", dir.display()),
        source,
    })?;

    let problems: Vec<Problem> = (1..=PROBLEMS).map(demo_problem).collect();
    self_check_style(&problems)?;

    let config = demo_config();
    let templates = Templates::default();
    let fixtures = build_fixtures(&problems, &templates)?;

    export_corpus(&problems, &dir.join(CORPUS_FILE))?;
    let ca_problems: Vec<Problem> = (1..=10).map(ca_problem).collect();
    export_corpus(&ca_problems, &dir.join(CA_CORPUS_FILE))?;

    let rows = translation_rows();
    let mut lines = String::new();
    for row in &rows {
        lines.push_str(&serde_json::to_string(row).expect("row serializes"));
        lines.push('\n');
    }
    std::fs::write(dir.join(TRANSLATIONS_FILE), lines).map_err(|source| DemoError::Io {
        context: format!("writing {}", dir.join(TRANSLATIONS_FILE).display()),
        source,
    })?;

    fixtures.save(&dir.join(FIXTURES_FILE))?;
    std::fs::write(dir.join(CONFIG_FILE), config.to_toml()?).map_err(|source| DemoError::Io {
        context: format!("writing {}", dir.join(CONFIG_FILE).display()),
        source,
    })?;

    let manifest = manifest();
    write_json(&dir.join(MANIFEST_FILE), &manifest).map_err(|e| DemoError::Io {
        context: "writing manifest".to_string(),
        source: std::io::Error::other(e.to_string()),
    })?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::load_corpus;
    use crate::pipeline::load_translations;

    #[test]
    fn demo_files_exist_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = generate_demo(dir.path()).unwrap();

        let corpus = load_corpus(&dir.path().join(CORPUS_FILE)).unwrap();
        assert_eq!(corpus.len(), 20);
        assert!(corpus.skipped.is_empty());
        let ca = load_corpus(&dir.path().join(CA_CORPUS_FILE)).unwrap();
        assert_eq!(ca.len(), 10);
        assert!(ca.problems.iter().all(|p| p
            .tests
            .iter()
            .all(|t| t.expected_output.is_some())));

        let rows = load_translations(&dir.path().join(TRANSLATIONS_FILE)).unwrap();
        assert_eq!(rows.len(), 29, "three directions, one missing row");

        let fixtures = MockFixtures::load(&dir.path().join(FIXTURES_FILE)).unwrap();
        assert_eq!(
            fixtures.label_logits.len(),
            18 * 20,
            "every (source, candidate) judgement is pinned"
        );
        assert_eq!(
            fixtures.completions.len(),
            18 * 2,
            "style and negative generations for all but d16/d19"
        );

        let config = PipelineConfig::load(Some(&dir.path().join(CONFIG_FILE))).unwrap();
        assert_eq!(config.judge.recall_k, 20);
        assert_eq!(config.style.m, 6);
        assert_eq!(config.style.n, 5);
        assert_eq!(
            config.gateway.mock_fixtures.as_deref(),
            Some(Path::new(FIXTURES_FILE))
        );
        assert!(manifest.function.summary.is_monotone());
    }

    #[test]
    fn manifest_round_trips_and_adds_up() {
        let dir = tempfile::tempdir().unwrap();
        let written = generate_demo(dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        let loaded: DemoManifest = serde_json::from_str(&text).unwrap();

        assert_eq!(loaded.function.summary, written.function.summary);
        let exported = loaded
            .function
            .stages
            .values()
            .filter(|s| matches!(s, FunnelStage::Exported))
            .count();
        assert_eq!(exported, loaded.function.summary.exported);
        assert_eq!(loaded.function.stages.len(), 20);

        let ineligible: usize = loaded.style.ineligible.values().sum();
        assert_eq!(loaded.style.records + ineligible, 20);

        for d in &loaded.ca.per_direction {
            assert!((d.ca - d.pass as f64 / d.total as f64).abs() < 1e-12);
        }
        let totals = &loaded.ca.category_totals;
        let failures =
            totals.compile_error + totals.runtime_error + totals.timeout + totals.incorrect_output;
        let pass: usize = loaded.ca.per_direction.iter().map(|d| d.pass).sum();
        let total: usize = loaded.ca.per_direction.iter().map(|d| d.total).sum();
        assert_eq!(pass + failures, total, "categories partition the rows");
    }

    #[test]
    fn generation_is_deterministic() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        generate_demo(dir_a.path()).unwrap();
        generate_demo(dir_b.path()).unwrap();
        for name in [
            CORPUS_FILE,
            CA_CORPUS_FILE,
            TRANSLATIONS_FILE,
            FIXTURES_FILE,
            CONFIG_FILE,
            MANIFEST_FILE,
        ] {
            let a = std::fs::read(dir_a.path().join(name)).unwrap();
            let b = std::fs::read(dir_b.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between generations");
        }
    }
}
