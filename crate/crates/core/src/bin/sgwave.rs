//! `sgwave run <spec> [--check]`, `sgwave validate <spec>`, `sgwave list-kinds`.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sgwave::experiment::{self, exit_code, ExperimentSpec, Severity};

#[derive(Parser)]
#[command(name = "sgwave", version, about = "Stochastic sine-Gordon wave experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its manifest and tables.
    Run {
        spec: PathBuf,
        /// Evaluate the pass/fail checks, write check.csv, exit 2 on failure.
        #[arg(long)]
        check: bool,
        /// Override the output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Report warnings and errors without running.
    Validate { spec: PathBuf },
    /// List experiment kinds.
    ListKinds,
}

fn dispatch(cli: Cli, out: &mut impl Write) -> std::io::Result<i32> {
    Ok(match cli.command {
        Command::ListKinds => {
            for (name, about) in experiment::list_kinds() {
                writeln!(out, "{name:<26} {about}")?;
            }
            exit_code::PASS
        }
        Command::Validate { spec } => match ExperimentSpec::load(&spec) {
            Err(e) => {
                eprintln!("{e}");
                e.exit_code()
            }
            Ok(spec) => {
                let findings = experiment::validate(&spec);
                for f in &findings {
                    writeln!(out, "{f}")?;
                }
                if findings.iter().any(|f| f.severity == Severity::Error) {
                    exit_code::CONFIG
                } else {
                    exit_code::PASS
                }
            }
        },
        Command::Run {
            spec,
            check,
            output_dir,
        } => match ExperimentSpec::load(&spec) {
            Err(e) => {
                eprintln!("{e}");
                e.exit_code()
            }
            Ok(mut spec) => {
                spec.check |= check;
                if output_dir.is_some() {
                    spec.output_dir = output_dir;
                }
                match experiment::run(&spec) {
                    Err(e) => {
                        eprintln!("{e}");
                        e.exit_code()
                    }
                    Ok(outcome) => {
                        writeln!(out, "wrote {} files to {}", outcome.files.len(), outcome.output_dir.display())?;
                        if spec.check {
                            for c in &outcome.checks {
                                let tag = if c.pass { "PASS" } else { "FAIL" };
                                writeln!(out, "{tag} {} observed {:.6e} required {}", c.check, c.observed, c.required)?;
                            }
                        }
                        outcome.exit_code(spec.check)
                    }
                }
            }
        },
    })
}

fn main() -> ExitCode {
    env_logger::Builder::new()
        .filter_level(log::LevelFilter::Warn)
        .parse_env("SGWAVE_LOG")
        .init();
    let code = dispatch(Cli::parse(), &mut std::io::stdout().lock()).unwrap_or_else(|e| {
        eprintln!("{e}");
        exit_code::RUNTIME
    });
    ExitCode::from(code as u8)
}

#[cfg(test)]
mod tests {
    use std::fs;
    use std::path::Path;

    use sgwave::experiment::Kind;

    use super::*;

    fn sgwave(args: &[&str]) -> (i32, String) {
        let cli = Cli::try_parse_from(std::iter::once("sgwave").chain(args.iter().copied())).expect("valid arguments");
        let mut buf = Vec::new();
        let code = dispatch(cli, &mut buf).unwrap();
        (code, String::from_utf8(buf).unwrap())
    }

    fn write_spec(dir: &Path, name: &str, body: &str) -> PathBuf {
        let path = dir.join(name);
        fs::write(&path, body).unwrap();
        path
    }

    fn s(p: &Path) -> &str {
        p.to_str().unwrap()
    }

    /// File name to contents, skipping the manifest (it records the output dir).
    fn tables(dir: &Path) -> Vec<(String, Vec<u8>)> {
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.file_name().unwrap() != "manifest.toml")
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
            .collect();
        files.sort();
        files
    }

    const SMALL_GAMMA: &str = r#"
name = "small-gamma"
kind = "gamma-check"
seed = 5
workers = 1

[params]
n = 8
samples = 300
offsets = [[0, 0], [1, 2]]
"#;

    #[test]
    fn list_kinds_names_every_kind() {
        let (code, text) = sgwave(&["list-kinds"]);
        assert_eq!(code, exit_code::PASS);
        for k in Kind::ALL {
            assert!(text.lines().any(|l| l.starts_with(k.name())), "{} missing", k.name());
        }
    }

    #[test]
    fn shipped_specs_validate() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("specs");
        let mut seen = 0;
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            assert_eq!(sgwave(&["validate", s(&path)]).0, exit_code::PASS, "{}", path.display());
            seen += 1;
        }
        assert_eq!(seen, Kind::ALL.len());
    }

    #[test]
    fn hrw_table_header_and_check_file() {
        let tmp = tempfile::tempdir().unwrap();
        let spec = write_spec(tmp.path(), "hrw.toml", "name = \"hrw\"\nkind = \"hrw-check\"\n");
        let dir = tmp.path().join("out");
        let (code, text) = sgwave(&["run", s(&spec), "--check", "--output-dir", s(&dir)]);
        assert_eq!(code, exit_code::PASS);
        assert!(text.contains("PASS hrw-ratio"));
        let table = fs::read_to_string(dir.join("hrw.csv")).unwrap();
        assert_eq!(table.lines().next(), Some("a,R,residual,bound"));
        assert_eq!(table.lines().count(), 1 + 5 * 4);
        let check = fs::read_to_string(dir.join("check.csv")).unwrap();
        assert!(check.starts_with("check,observed,required,pass"));
        assert!(check.contains("hrw-ratio"));
    }

    #[test]
    fn manifest_reproduces_run() {
        let tmp = tempfile::tempdir().unwrap();
        let spec = write_spec(tmp.path(), "g.toml", SMALL_GAMMA);
        let first = tmp.path().join("first");
        assert_eq!(sgwave(&["run", s(&spec), "--output-dir", s(&first)]).0, exit_code::PASS);
        let manifest = first.join("manifest.toml");
        let text = fs::read_to_string(&manifest).unwrap();
        assert!(text.contains("[provenance]"));
        assert!(text.contains("stream_rule_version = 1"));

        let second = tmp.path().join("second");
        assert_eq!(sgwave(&["run", s(&manifest), "--output-dir", s(&second)]).0, exit_code::PASS);
        assert_eq!(tables(&first), tables(&second));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let tmp = tempfile::tempdir().unwrap();
        let one = write_spec(tmp.path(), "one.toml", SMALL_GAMMA);
        let two = write_spec(tmp.path(), "two.toml", &SMALL_GAMMA.replace("workers = 1", "workers = 2"));
        let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
        assert_eq!(sgwave(&["run", s(&one), "--output-dir", s(&a)]).0, exit_code::PASS);
        assert_eq!(sgwave(&["run", s(&two), "--output-dir", s(&b)]).0, exit_code::PASS);
        assert_eq!(tables(&a), tables(&b));
    }

    #[test]
    fn failed_check_exits_two() {
        let tmp = tempfile::tempdir().unwrap();
        let spec = write_spec(
            tmp.path(),
            "hrw.toml",
            "name = \"hrw\"\nkind = \"hrw-check\"\ncheck = true\n[params]\nratio_bound = 0.1\n",
        );
        let (code, text) = sgwave(&["run", s(&spec), "--output-dir", s(&tmp.path().join("o"))]);
        assert_eq!(code, exit_code::CHECK_FAILED);
        assert!(text.contains("FAIL hrw-ratio"));
    }

    #[test]
    fn config_errors_exit_three() {
        let tmp = tempfile::tempdir().unwrap();
        let unknown = write_spec(tmp.path(), "u.toml", "name = \"x\"\nkind = \"no-such-kind\"\n");
        let bad_param = write_spec(
            tmp.path(),
            "b.toml",
            "name = \"x\"\nkind = \"sigma-asymptotics\"\n[params]\nbogus = 1\n",
        );
        let under = write_spec(
            tmp.path(),
            "m.toml",
            "name = \"x\"\nkind = \"solve\"\n[params]\nn = 64\ngrid_size = 64\n",
        );
        for spec in [&unknown, &bad_param, &under] {
            assert_eq!(sgwave(&["validate", s(spec)]).0, exit_code::CONFIG, "{}", spec.display());
            let out = tmp.path().join("o");
            assert_eq!(sgwave(&["run", s(spec), "--output-dir", s(&out)]).0, exit_code::CONFIG);
        }
        let missing = tmp.path().join("missing.toml");
        assert_eq!(sgwave(&["run", s(&missing)]).0, exit_code::CONFIG);
    }

    #[test]
    fn unwritable_output_exits_four() {
        let tmp = tempfile::tempdir().unwrap();
        let spec = write_spec(tmp.path(), "hrw.toml", "name = \"hrw\"\nkind = \"hrw-check\"\n");
        let blocker = tmp.path().join("file");
        fs::write(&blocker, "").unwrap();
        let (code, _) = sgwave(&["run", s(&spec), "--output-dir", s(&blocker.join("sub"))]);
        assert_eq!(code, exit_code::RUNTIME);
    }

    #[test]
    fn envelope_warning_is_not_an_error() {
        let tmp = tempfile::tempdir().unwrap();
        let spec = write_spec(
            tmp.path(),
            "w.toml",
            "name = \"w\"\nkind = \"solve\"\n[params]\nn = 8\nbeta_sq = 25.2\nt_end = 1.1\nh = 0.1\n",
        );
        let (code, text) = sgwave(&["validate", s(&spec)]);
        assert_eq!(code, exit_code::PASS);
        assert!(text.contains("warning:"));
    }
}
