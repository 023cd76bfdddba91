use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};
use isin::commands::{self, EvalSource, InferInput, SplitSel};
use isin::config::{RunConfig, KEYS};
use isin::{Error, Result};

fn cli() -> Command {
    let mut root = Command::new("isin")
        .about("Iterative part-state inference on synthetic widgets")
        .subcommand_required(true)
        .arg(Arg::new("config").long("config").global(true).value_name("FILE").help("key = value settings file"))
        .arg(Arg::new("seed").long("seed").global(true).value_name("N"))
        .arg(Arg::new("out").long("out").global(true).value_name("DIR").help("output directory"))
        .arg(Arg::new("jobs").long("jobs").global(true).value_name("N").value_parser(clap::value_parser!(usize)));
    for (key, help) in KEYS.iter().filter(|(k, _)| *k != "seed") {
        root = root.arg(Arg::new(*key).long(*key).global(true).value_name("V").allow_hyphen_values(true).help(*help));
    }
    let data = || Arg::new("data").long("data").value_name("DIR").help("dataset directory");
    let split = |default: &'static str| Arg::new("split").long("split").default_value(default);
    root.subcommand(Command::new("gen").about("generate a synthetic dataset"))
        .subcommand(
            Command::new("train")
                .about("train a model on the training split")
                .arg(data().required(true))
                .arg(Arg::new("mode").long("mode").value_name("MODE")),
        )
        .subcommand(
            Command::new("infer")
                .about("predict segmentations, S images and state scores")
                .arg(Arg::new("checkpoint").long("checkpoint").required(true))
                .arg(Arg::new("image").long("image").value_name("PPM").conflicts_with("data"))
                .arg(data().required_unless_present("image"))
                .arg(split("test")),
        )
        .subcommand(
            Command::new("eval")
                .about("score predictions against ground truth")
                .arg(Arg::new("checkpoint").long("checkpoint").conflicts_with("predictions"))
                .arg(Arg::new("predictions").long("predictions").value_name("DIR").required_unless_present("checkpoint"))
                .arg(data().required(true))
                .arg(split("test")),
        )
        .subcommand(
            Command::new("relate")
                .about("train and rank relationship predicates")
                .arg(Arg::new("relationships").long("relationships").required(true))
                .arg(Arg::new("predictions").long("predictions").value_name("CSV"))
                .arg(Arg::new("priors").long("priors").value_name("FILE")),
        )
        .arg(Arg::new("quiet").long("quiet").global(true).action(ArgAction::SetTrue))
}

fn path(m: &ArgMatches, id: &str) -> Option<PathBuf> {
    m.get_one::<String>(id).map(PathBuf::from)
}

fn run_config(m: &ArgMatches, sub: &ArgMatches) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(p) = path(m, "config") {
        cfg.apply_file(&p)?;
    }
    if let Some(seed) = m.get_one::<String>("seed") {
        cfg.set("seed", seed)?;
    }
    for (key, _) in KEYS.iter().filter(|(k, _)| *k != "seed") {
        if let Some(v) = sub.get_one::<String>(key).or_else(|| m.get_one::<String>(key)) {
            cfg.set(key, v)?;
        }
    }
    if let Some(mode) = sub.try_get_one::<String>("mode").ok().flatten() {
        cfg.set("train.mode", mode)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(m: &ArgMatches) -> Result<String> {
    if let Some(&jobs) = m.get_one::<usize>("jobs") {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Config(format!("--jobs: {e}")))?;
    }
    let (name, sub) = m.subcommand().expect("subcommand required");
    let cfg = run_config(m, sub)?;
    let out = path(sub, "out").or_else(|| path(m, "out"));
    let out_or = |default: &str| out.clone().unwrap_or_else(|| PathBuf::from(default));
    let split = || -> Result<SplitSel> { sub.get_one::<String>("split").unwrap().parse() };
    match name {
        "gen" => commands::cmd_gen(&cfg, &out_or("data")),
        "train" => commands::cmd_train(&cfg, &path(sub, "data").unwrap(), &out_or("run")),
        "infer" => {
            let input = match path(sub, "image") {
                Some(image) => InferInput::Image(image),
                None => InferInput::Dataset { dir: path(sub, "data").unwrap(), split: split()? },
            };
            commands::cmd_infer(&path(sub, "checkpoint").unwrap(), &input, &out_or("predictions"))
        }
        "eval" => {
            let source = match path(sub, "checkpoint") {
                Some(c) => EvalSource::Checkpoint(c),
                None => EvalSource::Predictions(path(sub, "predictions").unwrap()),
            };
            commands::cmd_eval(&source, &path(sub, "data").unwrap(), split()?, out.as_deref())
        }
        "relate" => commands::cmd_relate(
            &cfg,
            &path(sub, "relationships").unwrap(),
            path(sub, "predictions").as_deref(),
            path(sub, "priors").as_deref().map(Path::new),
            &out_or("relate"),
        ),
        _ => unreachable!(),
    }
}

fn main() -> ExitCode {
    let m = cli().get_matches();
    match run(&m) {
        Ok(report) => {
            if !m.get_flag("quiet") {
                print!("{report}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error kind={} code={} msg={msg}", e.kind(), e.exit_code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
