#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use ozbench::bot::{self, BotOptions, BotReport};
use ozbench::protocol::Role;
use ozbench::session::net::{self, RunningServer};
use ozbench::session::{Session, SessionConfig, SessionSummary};

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn repo_file(rel: &str) -> PathBuf {
    repo_root().join(rel)
}

/// Walled rectangle, `w` by `h` cells at 0.1 m.
pub fn room_rows(w: usize, h: usize) -> Vec<String> {
    (0..h)
        .map(|r| {
            if r == 0 || r == h - 1 {
                "#".repeat(w)
            } else {
                format!("#{}#", ".".repeat(w - 2))
            }
        })
        .collect()
}

pub fn world_json(rows: &[String], x: f64, y: f64, theta: f64) -> String {
    serde_json::json!({"resolution": 0.1, "start": {"x": x, "y": y, "theta": theta}, "rows": rows}).to_string()
}

pub fn write_world(dir: &Path, name: &str, json: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, json).unwrap();
    path
}

pub async fn start_server(world: &Path, log_dir: &Path, id: &str, tick_ms: u64) -> RunningServer {
    let config = SessionConfig {
        id: Some(id.to_string()),
        tick_ms,
        ..SessionConfig::new(world, log_dir)
    };
    let session = Session::create(&config).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    net::serve(session, listener, None).await.unwrap()
}

pub struct DemoRun {
    pub participant: BotReport,
    pub dm: BotReport,
    pub rn: BotReport,
    pub summary: SessionSummary,
    pub log_path: PathBuf,
    pub world_path: PathBuf,
    pub elapsed: Duration,
}

/// Run the bundled three-bot demo session in the corridor world.
pub async fn run_demo(log_dir: &Path) -> DemoRun {
    let world_path = repo_file("worlds/corridor.json");
    let started = Instant::now();
    let server = start_server(&world_path, log_dir, "demo", 50).await;
    let options = BotOptions {
        step_timeout: Duration::from_secs(8),
        linger: Duration::from_secs(8),
    };
    let load = |role: &str| bot::load_script(repo_file(&format!("scripts/demo/{role}.json"))).unwrap();
    let (p_script, dm_script, rn_script) = (load("participant"), load("dm"), load("rn"));
    let urls = Role::HUMAN.map(|r| server.attach_url(r));
    let (p, dm, rn) = tokio::join!(
        bot::run_bot(&urls[0], Role::Participant, &p_script, &options),
        bot::run_bot(&urls[1], Role::Dm, &dm_script, &options),
        bot::run_bot(&urls[2], Role::Rn, &rn_script, &options),
    );
    let log_path = server.log_path().to_path_buf();
    let summary = tokio::time::timeout(Duration::from_secs(5), server.wait())
        .await
        .expect("session did not close");
    DemoRun {
        participant: p.expect("participant bot"),
        dm: dm.expect("dm bot"),
        rn: rn.expect("rn bot"),
        summary,
        log_path,
        world_path,
        elapsed: started.elapsed(),
    }
}

pub mod criteria;
pub mod oracle;
