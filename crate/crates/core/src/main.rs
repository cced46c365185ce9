use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ozbench::bot::{self, BotOptions};
use ozbench::corpus;
use ozbench::protocol::Role;
use ozbench::session::{self, net, LogError, Session, SessionConfig, SessionLog};
use ozbench::sim::Pose;

const EXIT_FAIL: u8 = 1;
const EXIT_INVALID: u8 = 2;

#[derive(Parser)]
#[command(name = "ozbench", version, about = "Two-wizard Wizard-of-Oz session server and corpus tools")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Cmd {
    /// Host one session until a wizard closes it (or Ctrl-C).
    Serve {
        #[arg(long, env = "OZBENCH_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        world: PathBuf,
        /// Guideline rules; defaults to the bundled set.
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long, default_value = "logs")]
        log_dir: PathBuf,
        #[arg(long, default_value_t = session::DEFAULT_TICK_MS)]
        tick_ms: u64,
        #[arg(long)]
        session: Option<String>,
        /// Directory with participant.html, dm.html and rn.html.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
    /// Re-run a session log and print the resulting summary.
    Replay {
        log: PathBuf,
        #[arg(long)]
        world: Option<PathBuf>,
        /// Expected final pose as x,y,theta.
        #[arg(long, value_parser = parse_pose)]
        verify_pose: Option<Pose>,
        #[arg(long)]
        verify_map_hash: Option<String>,
    },
    /// Run a scripted client.
    Bot {
        #[arg(long)]
        role: Role,
        #[arg(long)]
        script: PathBuf,
        #[arg(long, default_value = "ws://127.0.0.1:8080")]
        url: String,
        #[arg(long)]
        session: String,
        #[arg(long, default_value_t = 30_000)]
        timeout_ms: u64,
    },
    /// Render a log as a readable transcript.
    Transcript { log: PathBuf },
    /// Summarize a log.
    Stats {
        log: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Replay a log and check its end state.
    Verify {
        log: PathBuf,
        #[arg(long)]
        world: Option<PathBuf>,
        #[arg(long, value_parser = parse_pose)]
        pose: Option<Pose>,
        #[arg(long)]
        map_hash: Option<String>,
    },
}

fn parse_pose(s: &str) -> Result<Pose, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [x, y, theta] => Ok(Pose::new(x, y, theta)),
        _ => Err("expected x,y,theta".into()),
    }
}

fn log_failure(e: &LogError) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        LogError::CorruptLog { .. } | LogError::WorldMismatch { .. } => ExitCode::from(EXIT_FAIL),
        _ => ExitCode::from(EXIT_INVALID),
    }
}

fn read_log(path: &Path) -> Result<SessionLog, ExitCode> {
    SessionLog::read(path).map_err(|e| log_failure(&e))
}

fn world_bytes(log: &SessionLog, world: Option<&Path>) -> Result<Vec<u8>, ExitCode> {
    let path = match (world, &log.header.world_path) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => return Err(log_failure(&LogError::NoWorld)),
    };
    std::fs::read(&path).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(EXIT_INVALID)
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) | Err(code) => code,
    }
}

fn run(command: Cmd) -> Result<ExitCode, ExitCode> {
    match command {
        Cmd::Serve {
            port,
            host,
            world,
            rules,
            log_dir,
            tick_ms,
            session,
            ui_dir,
        } => {
            let config = SessionConfig {
                rules_path: rules,
                tick_ms,
                id: session,
                ..SessionConfig::new(world, log_dir)
            };
            let session = Session::create(&config).map_err(|e| {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_INVALID)
            })?;
            runtime().block_on(serve(session, &host, port, ui_dir))
        }
        Cmd::Replay {
            log,
            world,
            verify_pose,
            verify_map_hash,
        } => {
            let parsed = read_log(&log)?;
            let bytes = world_bytes(&parsed, world.as_deref())?;
            let summary = session::replay(&parsed, &bytes).map_err(|e| log_failure(&e))?;
            println!("{}", summary.to_json());
            let mut ok = true;
            if let Some(p) = verify_pose {
                ok &= corpus::pose_matches(&p, &summary.pose, corpus::POSE_TOLERANCE);
            }
            if let Some(h) = verify_map_hash {
                ok &= h.eq_ignore_ascii_case(&summary.map_hash);
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(EXIT_FAIL) })
        }
        Cmd::Bot {
            role,
            script,
            url,
            session,
            timeout_ms,
        } => {
            let steps = bot::load_script(&script).map_err(|e| {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_INVALID)
            })?;
            let options = BotOptions {
                step_timeout: std::time::Duration::from_millis(timeout_ms),
                ..BotOptions::default()
            };
            let target = bot::attach_url(&url, &session, role);
            match runtime().block_on(bot::run_bot(&target, role, &steps, &options)) {
                Ok(report) => {
                    println!(
                        "{role}: sent {} frames, received {} frames",
                        report.sent.len(),
                        report.received.len()
                    );
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    Err(ExitCode::from(EXIT_FAIL))
                }
            }
        }
        Cmd::Transcript { log } => {
            print!("{}", corpus::transcript(&read_log(&log)?));
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Stats { log, format } => {
            let stats = corpus::stats(&read_log(&log)?);
            match format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&stats).expect("stats serialize")),
                Format::Text => print!("{}", corpus::stats_text(&stats)),
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Verify {
            log,
            world,
            pose,
            map_hash,
        } => {
            let parsed = read_log(&log)?;
            let bytes = world_bytes(&parsed, world.as_deref())?;
            let report = corpus::verify(&parsed, &bytes, pose, map_hash.as_deref()).map_err(|e| log_failure(&e))?;
            print!("{}", report.text());
            Ok(if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAIL)
            })
        }
    }
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .expect("tokio runtime")
}

async fn serve(session: Session, host: &str, port: u16, ui_dir: Option<PathBuf>) -> Result<ExitCode, ExitCode> {
    let listener = tokio::net::TcpListener::bind((host, port)).await.map_err(|e| {
        eprintln!("error: cannot bind {host}:{port}: {e}");
        ExitCode::from(EXIT_INVALID)
    })?;
    let server = net::serve(session, listener, ui_dir).await.map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_FAIL)
    })?;
    println!("session {}", server.session_id());
    for role in Role::HUMAN {
        println!("  {role}: {}", server.attach_url(role));
    }
    println!("log: {}", server.log_path().display());
    let closer = server.closer();
    let mut done = Box::pin(server.wait());
    let summary = tokio::select! {
        s = &mut done => s,
        _ = tokio::signal::ctrl_c() => {
            closer.close();
            done.await
        }
    };
    println!("{}", summary.to_json());
    Ok(ExitCode::SUCCESS)
}
