//! Running a configured experiment from code instead of the `sgwave` binary.

use sgwave::experiment::{self, ExperimentSpec};

fn main() {
    let text = r#"
        name = "sigma-demo"
        kind = "sigma-asymptotics"
        seed = 0
        check = true
        output_dir = "sgwave-out/sigma-demo"

        [params]
        ns = [16, 32, 64, 128]
    "#;
    let spec = ExperimentSpec::parse(text).expect("valid spec");
    for f in experiment::validate(&spec) {
        println!("{f}");
    }
    match experiment::run(&spec) {
        Ok(out) => {
            println!("wrote {:?} to {}", out.files, out.output_dir.display());
            for c in &out.checks {
                println!("{} {} {} (observed {:.4e})", if c.pass { "PASS" } else { "FAIL" }, c.check, c.required, c.observed);
            }
        }
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    }
}
