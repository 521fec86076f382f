use std::process::ExitCode;

use alphasoft::orchestrator::{calibrate_to_file, export_figures, run, RunConfig, CALIBRATION_FILE, REPORT_JSON};
use alphasoft::service::LiveSession;
use alphasoft_cli::args::{CalibrateArgs, Cli, Command, ExportArgs, RunArgs, ServeArgs};
use alphasoft_cli::server::{ServeOptions, Server};
use clap::Parser;

fn fail(code: i32, e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(code as u8)
}

fn cmd_run(args: RunArgs) -> ExitCode {
    let cfg = match args.config.to_config() {
        Ok(c) => c,
        Err(e) => return fail(e.exit_code(), e),
    };
    match run(&cfg) {
        Ok(report) => {
            println!(
                "{} s, {} frames, {} alpha events -> {}",
                report.duration_s,
                report.frames_emitted,
                report.alpha_events,
                cfg.output_dir.join(REPORT_JSON).display()
            );
            if let Some(c) = &report.character {
                match c.mean_duty {
                    Some(d) => println!("character: {} updates, mean duty {d:.1}", c.updates),
                    None => println!("character: no updates"),
                }
            }
            if let Some(f) = &report.flower {
                println!(
                    "flower: {} updates, pressure {:.1}..{:.1} kPa",
                    f.updates, f.min_p_true_kpa, f.max_p_true_kpa
                );
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.exit_code(), e),
    }
}

fn cmd_calibrate(args: CalibrateArgs) -> ExitCode {
    let cfg = match args.config.to_config() {
        Ok(c) => c,
        Err(e) => return fail(e.exit_code(), e),
    };
    let path = args.output.unwrap_or_else(|| cfg.output_dir.join(CALIBRATION_FILE));
    match calibrate_to_file(&cfg, args.duration, &path) {
        Ok(cal) => {
            println!("p_ref = {}\nthreshold = {}\n-> {}", cal.p_ref, cal.threshold, path.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.exit_code(), e),
    }
}

fn cmd_export(args: ExportArgs) -> ExitCode {
    let dir = args
        .run_dir
        .or(args.out)
        .unwrap_or_else(|| RunConfig::default().output_dir);
    match export_figures(&dir) {
        Ok(files) => {
            for f in files {
                println!("{} ({} rows)", dir.join(&f.name).display(), f.rows);
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.exit_code(), e),
    }
}

fn cmd_serve(args: ServeArgs) -> ExitCode {
    let cfg = match args.config.to_config() {
        Ok(c) => c,
        Err(e) => return fail(e.exit_code(), e),
    };
    let session = if args.idle {
        LiveSession::idle(cfg)
    } else {
        match LiveSession::start(cfg) {
            Ok(s) => s,
            Err(e) => return fail(e.exit_code(), e),
        }
    };
    let opts = ServeOptions {
        bind: args.bind,
        port: args.port,
        tcp_port: args.tcp_port,
    };
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => return fail(4, e),
    };
    rt.block_on(async {
        let server = match Server::start(session, &opts).await {
            Ok(s) => s,
            Err(e) => return fail(4, format!("bind {}:{}: {e}", opts.bind, opts.port)),
        };
        println!("serving ws://{}/ws", server.http_addr);
        if let Some(addr) = server.tcp_addr {
            println!("tcp ndjson on {addr}");
        }
        let _ = tokio::signal::ctrl_c().await;
        server.shutdown().await;
        ExitCode::SUCCESS
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run(a) => cmd_run(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::ExportFigs(a) => cmd_export(a),
        Command::Serve(a) => cmd_serve(a),
    }
}
