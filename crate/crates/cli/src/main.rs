//! `fairrisk` command-line tool.
//!
//! Every subcommand takes `--config <file>` plus one `--<key> <value>` flag
//! per configuration key; flags override the file. Failures print a single
//! line `error[<code>]: <message>` to stderr and exit with status 1.

use std::process::ExitCode;

use clap::{Arg, ArgMatches, Command};
use fairrisk::pipeline::{self, config::KEYS, PipelineConfig};

type Handler = fn(&PipelineConfig) -> fairrisk::Result<String>;

const COMMANDS: &[(&str, &str, Handler)] = &[
    ("synth", "Generate a synthetic two-group dataset", pipeline::cmd_synth),
    ("fit", "Split the baseline group and train the classifier", pipeline::cmd_fit),
    ("transport", "Fit the comparison-to-baseline transport map", pipeline::cmd_transport),
    ("calibrate", "Compute the conformal threshold on the calibration split", pipeline::cmd_calibrate),
    ("forecast", "Point predictions and prediction sets for new rows", pipeline::cmd_forecast),
    ("evaluate", "Parity report on labeled test data", pipeline::cmd_evaluate),
    ("report", "Print a saved evaluation report", pipeline::cmd_report),
];

fn cli() -> Command {
    let mut app = Command::new("fairrisk")
        .about("Baseline-trained risk forecasts with transported covariates and conformal sets")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true);
    for (name, about, _) in COMMANDS {
        let mut sub = Command::new(*name).about(*about).arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("key = value configuration file"),
        );
        for (key, default, doc) in KEYS {
            let help = if default.is_empty() {
                doc.to_string()
            } else {
                format!("{doc} [default: {default}]")
            };
            sub = sub.arg(Arg::new(*key).long(*key).value_name("VALUE").help(help));
        }
        app = app.subcommand(sub);
    }
    app
}

fn overrides(m: &ArgMatches) -> Vec<(String, String)> {
    KEYS.iter()
        .filter_map(|(k, _, _)| m.get_one::<String>(k).map(|v| (k.to_string(), v.clone())))
        .collect()
}

fn fail(code: &str, message: &str) -> ExitCode {
    let one_line = message.split_whitespace().collect::<Vec<_>>().join(" ");
    eprintln!("error[{code}]: {one_line}");
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("usage error");
            return fail("usage", first.trim_start_matches("error: "));
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let handler = COMMANDS
        .iter()
        .find(|(n, _, _)| *n == name)
        .map(|(_, _, h)| *h)
        .expect("registered subcommand");
    let config_path = sub.get_one::<String>("config").map(std::path::Path::new);
    let result = PipelineConfig::load(config_path, overrides(sub)).and_then(|cfg| handler(&cfg));
    match result {
        Ok(out) => {
            print!("{out}");
            if !out.ends_with('\n') {
                println!();
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.code(), &e.to_string()),
    }
}
