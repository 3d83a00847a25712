//! Program execution under resource limits.
//!
//! The sandbox compiles and runs snippets in the five supported languages,
//! enforcing wall-clock, memory, and output caps per process. Isolation is
//! process-level: every run gets a fresh scratch working directory, its own
//! process group (so runaway children die with it), OS resource limits, and
//! best-effort network denial. Container isolation is out of scope.
//!
//! Compiled artifacts are cached by snippet content hash, so a snippet is
//! compiled exactly once per [`Sandbox`] no matter how many inputs it runs.
//! Toolchain commands are configuration, not code: each language maps to a
//! compile/run argv pair with `{src}`, `{bin}`, `{dir}`, and `{mem_mb}`
//! placeholders, so machines can point at whatever compiler they have.

mod difftest;
mod exec;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{b64, CodeSnippet, Language};

pub use difftest::{
    compare_outputs, compute_ca, differential_test, evaluate_against_expected, flag_instability,
    materialize_expected, normalize_output, CaSummary, ComparePolicy, DiffCategory,
    DiffTestReport, InputComparison, MaterializeReport,
};

/// Errors from sandbox setup or execution plumbing. Program misbehaviour
/// (non-zero exit, timeout, …) is not an error — it is an
/// [`ExecutionResult`] status.
#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("no toolchain configured for {language}")]
    ToolchainMissing { language: Language },
    #[error("toolchain for {language} is invalid: {message}")]
    ToolchainInvalid { language: Language, message: String },
    #[error("invalid execution limits: {0}")]
    InvalidLimits(String),
    #[error("sandbox I/O failure ({context}): {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("differential test needs at least one test case")]
    EmptyTests,
    #[error("cannot summarize an empty report list")]
    EmptyReports,
    #[error("source program failed on input {input_id}: status {status:?}")]
    SourceFailed {
        input_id: usize,
        status: ExecStatus,
        result: Box<ExecutionResult>,
    },
    #[error("pair invalid: source program failed on input {input_id}")]
    PairInvalid {
        input_id: usize,
        result: Box<ExecutionResult>,
    },
    #[error("test case {input_id} has no expected output; materialize it first")]
    MissingExpected { input_id: usize },
}

impl SandboxError {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Self::Io {
            context: context.into(),
            source,
        }
    }
}

/// Per-process resource caps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecLimits {
    /// Wall-clock budget in seconds.
    pub wall_time_secs: u64,
    /// Address-space cap in bytes (applied where the runtime tolerates it).
    pub memory_bytes: u64,
    /// Combined cap on captured stdout/stderr, each, in bytes.
    pub max_output_bytes: u64,
}

impl Default for ExecLimits {
    fn default() -> Self {
        Self {
            wall_time_secs: 10,
            memory_bytes: 512 * 1024 * 1024,
            max_output_bytes: 8 * 1024 * 1024,
        }
    }
}

impl ExecLimits {
    pub fn validate(&self) -> Result<(), SandboxError> {
        for (name, value) in [
            ("wall_time_secs", self.wall_time_secs),
            ("memory_bytes", self.memory_bytes),
            ("max_output_bytes", self.max_output_bytes),
        ] {
            if value == 0 {
                return Err(SandboxError::InvalidLimits(format!(
                    "{name} must be positive"
                )));
            }
        }
        Ok(())
    }
}

/// How one program invocation ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecStatus {
    Ok,
    CompileError,
    RuntimeError,
    Timeout,
    OutputOverflow,
}

/// Outcome of one program invocation. `stdout` is kept only for `ok` and
/// `runtime_error` statuses — a timed-out or overflowing program's partial
/// output is untrustworthy and is dropped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub status: ExecStatus,
    #[serde(with = "b64")]
    pub stdout: Vec<u8>,
    #[serde(with = "b64")]
    pub stderr: Vec<u8>,
    pub wall_ms: u64,
}

impl ExecutionResult {
    pub fn ok(&self) -> bool {
        self.status == ExecStatus::Ok
    }
}

/// Compile/run argv templates for one language.
///
/// Placeholders, substituted in every argv element:
/// `{src}` source file, `{bin}` output binary path, `{dir}` artifact
/// directory, `{mem_mb}` the memory limit in MiB.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageToolchain {
    /// Compile argv; `None` only for languages that need no checking step.
    #[serde(default)]
    pub compile: Option<Vec<String>>,
    /// Run argv.
    pub run: Vec<String>,
    /// Whether to apply the address-space rlimit to runs. Managed runtimes
    /// (JVM, Go) reserve large arenas up front and die under RLIMIT_AS, so
    /// their defaults bound memory through their own flags instead.
    #[serde(default = "default_true")]
    pub rlimit_memory: bool,
}

fn default_true() -> bool {
    true
}

/// Toolchain commands per language.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ToolchainConfig {
    map: BTreeMap<Language, LanguageToolchain>,
}

impl ToolchainConfig {
    /// Conventional commands for all five languages (`gcc`, `g++`, `go`,
    /// `javac`/`java`, `python3`). Python's "compile" step is a bytecode
    /// compile, so syntax errors classify as compile errors there too.
    /// Java snippets must declare `class Main`.
    #[must_use]
    pub fn defaults() -> Self {
        let mut map = BTreeMap::new();
        map.insert(
            Language::C,
            LanguageToolchain {
                compile: Some(argv(&["gcc", "-O2", "-o", "{bin}", "{src}", "-lm"])),
                run: argv(&["{bin}"]),
                rlimit_memory: true,
            },
        );
        map.insert(
            Language::Cpp,
            LanguageToolchain {
                compile: Some(argv(&["g++", "-O2", "-std=c++17", "-o", "{bin}", "{src}"])),
                run: argv(&["{bin}"]),
                rlimit_memory: true,
            },
        );
        map.insert(
            Language::Go,
            LanguageToolchain {
                compile: Some(argv(&["go", "build", "-o", "{bin}", "{src}"])),
                run: argv(&["{bin}"]),
                rlimit_memory: false,
            },
        );
        map.insert(
            Language::Java,
            LanguageToolchain {
                compile: Some(argv(&["javac", "-d", "{dir}", "{src}"])),
                run: argv(&["java", "-Xmx{mem_mb}m", "-cp", "{dir}", "Main"]),
                rlimit_memory: false,
            },
        );
        map.insert(
            Language::Python,
            LanguageToolchain {
                compile: Some(argv(&["python3", "-m", "py_compile", "{src}"])),
                run: argv(&["python3", "{src}"]),
                rlimit_memory: true,
            },
        );
        Self { map }
    }

    pub fn get(&self, language: Language) -> Option<&LanguageToolchain> {
        self.map.get(&language)
    }

    pub fn set(&mut self, language: Language, toolchain: LanguageToolchain) {
        self.map.insert(language, toolchain);
    }

    pub fn remove(&mut self, language: Language) -> Option<LanguageToolchain> {
        self.map.remove(&language)
    }

    /// Overlay explicitly configured languages on top of another config.
    pub fn merged_over(mut self, base: Self) -> Self {
        let mut map = base.map;
        map.append(&mut self.map);
        Self { map }
    }
}

fn argv(parts: &[&str]) -> Vec<String> {
    parts.iter().map(|s| s.to_string()).collect()
}

/// Compiled-artifact record for one snippet content hash.
enum Artifact {
    Ready { dir: PathBuf },
    CompileFailed(ExecutionResult),
}

/// One snippet's cache slot: the outer lock serializes the one-time compile,
/// the inner `Option` holds the outcome once it exists.
type ArtifactSlot = Arc<Mutex<Option<Arc<Artifact>>>>;

/// Compiles and runs snippets with per-snippet artifact caching.
pub struct Sandbox {
    toolchains: ToolchainConfig,
    limits: ExecLimits,
    /// Root for per-snippet artifact directories; removed on drop.
    cache_root: tempfile::TempDir,
    artifacts: Mutex<BTreeMap<String, ArtifactSlot>>,
    compile_count: AtomicUsize,
}

impl Sandbox {
    pub fn new(toolchains: ToolchainConfig, limits: ExecLimits) -> Result<Self, SandboxError> {
        limits.validate()?;
        let cache_root = tempfile::Builder::new()
            .prefix("sandbox-cache-")
            .tempdir()
            .map_err(|e| SandboxError::io("creating artifact cache", e))?;
        Ok(Self {
            toolchains,
            limits,
            cache_root,
            artifacts: Mutex::new(BTreeMap::new()),
            compile_count: AtomicUsize::new(0),
        })
    }

    /// Sandbox with default toolchains and limits.
    pub fn with_defaults() -> Result<Self, SandboxError> {
        Self::new(ToolchainConfig::defaults(), ExecLimits::default())
    }

    pub fn limits(&self) -> &ExecLimits {
        &self.limits
    }

    /// Number of compile subprocesses launched so far (cache effectiveness).
    pub fn compile_count(&self) -> usize {
        self.compile_count.load(Ordering::SeqCst)
    }

    /// Source file name inside the artifact directory. Java requires the
    /// file name to match the public class, which we fix as `Main`.
    fn source_file_name(language: Language) -> String {
        match language {
            Language::Java => "Main.java".to_string(),
            other => format!("main.{}", other.file_extension()),
        }
    }

    fn substitute(template: &[String], src: &Path, bin: &Path, dir: &Path, mem_mb: u64) -> Vec<String> {
        template
            .iter()
            .map(|part| {
                part.replace("{src}", &src.to_string_lossy())
                    .replace("{bin}", &bin.to_string_lossy())
                    .replace("{dir}", &dir.to_string_lossy())
                    .replace("{mem_mb}", &mem_mb.to_string())
            })
            .collect()
    }

    /// Compile (or fetch the cached artifact for) a snippet. The inner lock
    /// serialises work per content hash; distinct snippets compile in
    /// parallel.
    fn ensure_artifact(&self, code: &CodeSnippet) -> Result<Arc<Artifact>, SandboxError> {
        let toolchain = self
            .toolchains
            .get(code.language)
            .ok_or(SandboxError::ToolchainMissing {
                language: code.language,
            })?;
        if toolchain.run.is_empty() {
            return Err(SandboxError::ToolchainInvalid {
                language: code.language,
                message: "run command is empty".into(),
            });
        }
        let hash = code.content_hash();
        let slot = {
            let mut map = self.artifacts.lock().expect("artifact map poisoned");
            Arc::clone(map.entry(hash.clone()).or_default())
        };
        let mut entry = slot.lock().expect("artifact slot poisoned");
        if let Some(artifact) = entry.as_ref() {
            return Ok(Arc::clone(artifact));
        }

        let dir = self.cache_root.path().join(&hash[..16]);
        std::fs::create_dir_all(&dir)
            .map_err(|e| SandboxError::io("creating artifact directory", e))?;
        let src = dir.join(Self::source_file_name(code.language));
        std::fs::write(&src, &code.source_text)
            .map_err(|e| SandboxError::io("writing source file", e))?;
        let bin = dir.join("prog");

        let artifact = if let Some(compile_template) = &toolchain.compile {
            self.compile_count.fetch_add(1, Ordering::SeqCst);
            let mem_mb = self.limits.memory_bytes / (1024 * 1024);
            let command = Self::substitute(compile_template, &src, &bin, &dir, mem_mb);
            // Compiles are trusted toolchain invocations: generous wall
            // budget, no memory rlimit, output still capped.
            let spec = exec::RunSpec {
                wall: std::time::Duration::from_secs(self.limits.wall_time_secs.max(60)),
                memory_rlimit: None,
                output_cap: self.limits.max_output_bytes as usize,
                file_size_cap: None,
            };
            let raw = exec::run_command(&command, &[], &spec, &dir)?;
            if raw.timed_out || !raw.exit_ok {
                // Route compiler stdout into stderr so diagnostics survive
                // the "stdout empty unless ok/runtime_error" invariant.
                let mut stderr = raw.stderr;
                if !raw.stdout.is_empty() {
                    stderr.extend_from_slice(b"\n");
                    stderr.extend_from_slice(&raw.stdout);
                }
                if raw.timed_out {
                    stderr.extend_from_slice(
                        format!("\ncompile step exceeded {} s", spec.wall.as_secs()).as_bytes(),
                    );
                }
                Artifact::CompileFailed(ExecutionResult {
                    status: ExecStatus::CompileError,
                    stdout: Vec::new(),
                    stderr,
                    wall_ms: raw.wall_ms,
                })
            } else {
                Artifact::Ready { dir }
            }
        } else {
            Artifact::Ready { dir }
        };

        let artifact = Arc::new(artifact);
        *entry = Some(Arc::clone(&artifact));
        Ok(artifact)
    }

    /// Run a snippet on one input under the sandbox's limits.
    pub fn run_program(
        &self,
        code: &CodeSnippet,
        input: &[u8],
    ) -> Result<ExecutionResult, SandboxError> {
        self.run_program_with_limits(code, input, &self.limits.clone())
    }

    /// Run a snippet on one input under explicit limits. Compilation reuses
    /// the cached artifact regardless of the limits passed here.
    pub fn run_program_with_limits(
        &self,
        code: &CodeSnippet,
        input: &[u8],
        limits: &ExecLimits,
    ) -> Result<ExecutionResult, SandboxError> {
        limits.validate()?;
        let toolchain = self
            .toolchains
            .get(code.language)
            .ok_or(SandboxError::ToolchainMissing {
                language: code.language,
            })?
            .clone();
        let artifact = self.ensure_artifact(code)?;
        let dir = match artifact.as_ref() {
            Artifact::CompileFailed(result) => return Ok(result.clone()),
            Artifact::Ready { dir } => dir.clone(),
        };

        let src = dir.join(Self::source_file_name(code.language));
        let bin = dir.join("prog");
        let mem_mb = limits.memory_bytes / (1024 * 1024);
        let command = Self::substitute(&toolchain.run, &src, &bin, &dir, mem_mb);

        // Fresh scratch working directory per run: programs that write
        // files cannot observe each other.
        let scratch = tempfile::Builder::new()
            .prefix("sandbox-run-")
            .tempdir()
            .map_err(|e| SandboxError::io("creating scratch directory", e))?;
        let spec = exec::RunSpec {
            wall: std::time::Duration::from_secs(limits.wall_time_secs),
            memory_rlimit: toolchain.rlimit_memory.then_some(limits.memory_bytes),
            output_cap: limits.max_output_bytes as usize,
            file_size_cap: Some(limits.max_output_bytes),
        };
        let raw = exec::run_command(&command, input, &spec, scratch.path())?;

        let wall_limit_ms = limits.wall_time_secs * 1000;
        let result = if raw.overflowed {
            ExecutionResult {
                status: ExecStatus::OutputOverflow,
                stdout: Vec::new(),
                stderr: raw.stderr,
                wall_ms: raw.wall_ms.min(wall_limit_ms),
            }
        } else if raw.timed_out {
            ExecutionResult {
                status: ExecStatus::Timeout,
                stdout: Vec::new(),
                stderr: raw.stderr,
                wall_ms: raw.wall_ms,
            }
        } else if raw.exit_ok {
            ExecutionResult {
                status: ExecStatus::Ok,
                stdout: raw.stdout,
                stderr: raw.stderr,
                wall_ms: raw.wall_ms.min(wall_limit_ms),
            }
        } else {
            ExecutionResult {
                status: ExecStatus::RuntimeError,
                stdout: raw.stdout,
                stderr: raw.stderr,
                wall_ms: raw.wall_ms.min(wall_limit_ms),
            }
        };
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Origin;

    fn snippet(id: &str, lang: Language, text: &str) -> CodeSnippet {
        CodeSnippet::new(id, lang, text, Origin::Manual).unwrap()
    }

    fn quick_limits() -> ExecLimits {
        ExecLimits {
            wall_time_secs: 5,
            ..ExecLimits::default()
        }
    }

    fn sandbox() -> Sandbox {
        Sandbox::new(ToolchainConfig::defaults(), quick_limits()).unwrap()
    }

    #[test]
    fn echo_program_round_trips_stdin() {
        let sb = sandbox();
        let echo = snippet(
            "echo",
            Language::Python,
            "import sys\nsys.stdout.write(sys.stdin.read())\n",
        );
        let result = sb.run_program(&echo, b"7\n").unwrap();
        assert_eq!(result.status, ExecStatus::Ok, "{result:?}");
        assert_eq!(result.stdout, b"7\n");
    }

    #[test]
    fn c_compile_and_run() {
        let sb = sandbox();
        let doubler = snippet(
            "dbl",
            Language::C,
            "#include <stdio.h>\nint main(void){int x; if(scanf(\"%d\",&x)!=1) return 1; printf(\"%d\\n\", 2*x); return 0;}\n",
        );
        let result = sb.run_program(&doubler, b"21\n").unwrap();
        assert_eq!(result.status, ExecStatus::Ok, "{result:?}");
        assert_eq!(result.stdout, b"42\n");
    }

    #[test]
    fn syntax_error_is_compile_error_with_diagnostics() {
        let sb = sandbox();
        let broken = snippet(
            "broken",
            Language::C,
            "int main(void) { return 0 }\n", // missing semicolon
        );
        let result = sb.run_program(&broken, b"").unwrap();
        assert_eq!(result.status, ExecStatus::CompileError);
        assert!(result.stdout.is_empty());
        assert!(!result.stderr.is_empty());
    }

    #[test]
    fn python_syntax_error_is_compile_error() {
        let sb = sandbox();
        let broken = snippet("broken-py", Language::Python, "def f(:\n    pass\n");
        let result = sb.run_program(&broken, b"").unwrap();
        assert_eq!(result.status, ExecStatus::CompileError, "{result:?}");
        assert!(result.stdout.is_empty());
    }

    #[test]
    fn infinite_loop_times_out() {
        let sb = sandbox();
        let spin = snippet("spin", Language::Python, "while True:\n    pass\n");
        let limits = ExecLimits {
            wall_time_secs: 1,
            ..ExecLimits::default()
        };
        let result = sb.run_program_with_limits(&spin, b"", &limits).unwrap();
        assert_eq!(result.status, ExecStatus::Timeout);
        assert!(result.stdout.is_empty());
        assert!(result.wall_ms >= 900, "killed too early: {}", result.wall_ms);
    }

    #[test]
    fn runaway_output_is_flagged_and_stopped_early() {
        let sb = sandbox();
        let firehose = snippet(
            "firehose",
            Language::Python,
            "while True:\n    print('x' * 65536)\n",
        );
        let limits = ExecLimits {
            wall_time_secs: 30,
            max_output_bytes: 256 * 1024,
            ..ExecLimits::default()
        };
        let result = sb.run_program_with_limits(&firehose, b"", &limits).unwrap();
        assert_eq!(result.status, ExecStatus::OutputOverflow);
        assert!(result.stdout.is_empty());
        assert!(
            result.wall_ms < 20_000,
            "overflow should kill long before the wall limit, took {} ms",
            result.wall_ms
        );
    }

    #[test]
    fn nonzero_exit_is_runtime_error_and_keeps_stdout() {
        let sb = sandbox();
        let failing = snippet(
            "fail",
            Language::Python,
            "import sys\nprint('partial')\nsys.exit(3)\n",
        );
        let result = sb.run_program(&failing, b"").unwrap();
        assert_eq!(result.status, ExecStatus::RuntimeError);
        assert_eq!(result.stdout, b"partial\n");
    }

    #[test]
    fn memory_limit_stops_allocation() {
        let sb = sandbox();
        let hog = snippet(
            "hog",
            Language::C,
            "#include <stdio.h>\n#include <stdlib.h>\n#include <string.h>\nint main(void){size_t n=(size_t)600*1024*1024; char*p=malloc(n); if(!p){fprintf(stderr,\"alloc failed\\n\"); return 1;} memset(p,1,n); printf(\"DONE\\n\"); return 0;}\n",
        );
        let limits = ExecLimits {
            memory_bytes: 128 * 1024 * 1024,
            wall_time_secs: 5,
            ..ExecLimits::default()
        };
        let result = sb.run_program_with_limits(&hog, b"", &limits).unwrap();
        assert_eq!(result.status, ExecStatus::RuntimeError, "{result:?}");
        assert!(!result.stdout.ends_with(b"DONE\n"));
    }

    #[test]
    fn missing_toolchain_is_a_configuration_error() {
        let mut toolchains = ToolchainConfig::defaults();
        toolchains.remove(Language::Go);
        let sb = Sandbox::new(toolchains, quick_limits()).unwrap();
        let go = snippet("go", Language::Go, "package main\nfunc main() {}\n");
        let err = sb.run_program(&go, b"").unwrap_err();
        assert!(matches!(
            err,
            SandboxError::ToolchainMissing {
                language: Language::Go
            }
        ));
    }

    #[test]
    fn binary_cache_compiles_once_per_content_hash() {
        let sb = sandbox();
        let code = snippet(
            "cached",
            Language::C,
            "#include <stdio.h>\nint main(void){puts(\"hi\");return 0;}\n",
        );
        for _ in 0..3 {
            let result = sb.run_program(&code, b"").unwrap();
            assert_eq!(result.status, ExecStatus::Ok);
        }
        // Same content under a different snippet id also hits the cache.
        let alias = snippet("cached-alias", Language::C, &code.source_text);
        sb.run_program(&alias, b"").unwrap();
        assert_eq!(sb.compile_count(), 1);
    }

    #[test]
    fn failed_compiles_are_cached_too() {
        let sb = sandbox();
        let broken = snippet("broken", Language::C, "int main(void { return 0; }\n");
        for _ in 0..2 {
            let result = sb.run_program(&broken, b"").unwrap();
            assert_eq!(result.status, ExecStatus::CompileError);
        }
        assert_eq!(sb.compile_count(), 1);
    }

    #[test]
    fn scratch_directories_isolate_runs() {
        let sb = sandbox();
        // Each run starts in an empty scratch dir: the marker file written
        // by the first run must be invisible to the second.
        let probe = snippet(
            "probe",
            Language::Python,
            "import os\nprint(sorted(os.listdir('.')))\nopen('marker','w').write('x')\n",
        );
        let first = sb.run_program(&probe, b"").unwrap();
        let second = sb.run_program(&probe, b"").unwrap();
        assert_eq!(first.stdout, b"[]\n");
        assert_eq!(second.stdout, b"[]\n");
    }

    #[test]
    fn limits_validate() {
        assert!(ExecLimits::default().validate().is_ok());
        let bad = ExecLimits {
            wall_time_secs: 0,
            ..ExecLimits::default()
        };
        assert!(matches!(bad.validate(), Err(SandboxError::InvalidLimits(_))));
    }

    #[test]
    fn toolchain_config_round_trips_toml() {
        let config = ToolchainConfig::defaults();
        let toml_text = toml::to_string(&config).unwrap();
        let back: ToolchainConfig = toml::from_str(&toml_text).unwrap();
        assert_eq!(config, back);
        assert!(toml_text.contains("[cpp]"), "{toml_text}");
    }
}
