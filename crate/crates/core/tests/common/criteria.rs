//! One function per acceptance criterion. Each returns `Ok(detail)` or
//! `Err(reason)`; the per-area test files assert on them and the
//! `acceptance` target prints them.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::panic;
use std::time::{Duration, Instant};

use futures_util::{SinkExt, StreamExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tokio_tungstenite::tungstenite::protocol::frame::coding::CloseCode;
use tokio_tungstenite::tungstenite::protocol::CloseFrame;
use tokio_tungstenite::tungstenite::Message;

use ozbench::command::{self, Command, LinearDirection, Thousandths, TurnDirection};
use ozbench::corpus;
use ozbench::guidelines::{Outcome as Verdict, Rules};
use ozbench::protocol::{
    decode, encode, validate_route, Channel, DenialReason, Envelope, MessageKind, Payload, Primitive,
    RouteDecision, Role,
};
use ozbench::session::{replay, LogError, Session, SessionConfig, SessionLog};
use ozbench::sim::{self, capture_image, raycast, Motion, Outcome, Pose, Sim, World, WorldFile};
use uuid::Uuid;

use super::oracle::{camera_column, OracleGrid};
use super::{repo_file, room_rows, start_server, world_json, write_world};

pub type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- routing

/// The documented routing table, written out independently of the crate.
pub fn routing_oracle(from: Role, channel: Channel, kind: MessageKind) -> Result<BTreeSet<Role>, DenialReason> {
    use Channel::*;
    use MessageKind as K;
    use Role::*;
    let sender = match channel {
        PDmSpeech => Participant,
        DmPChat | DmRnChat => Dm,
        RnDmSpeech | RnSimCmd => Rn,
        SimSensor => Sim,
        ServerCtrl => Server,
    };
    if from != sender {
        return Err(DenialReason::WrongSender);
    }
    let to: &[Role] = match (channel, kind) {
        (PDmSpeech, K::Chat) => &[Dm],
        (DmPChat, K::Chat) => &[Participant],
        (DmRnChat, K::Chat | K::Command) => &[Rn],
        (RnDmSpeech, K::Chat) => &[Dm],
        (RnSimCmd, K::Motion | K::Status) => &[Sim],
        (SimSensor, K::MapDelta | K::Pose | K::Image) => &[Participant, Dm, Rn],
        (SimSensor, K::LiveView) => &[Dm, Rn],
        (SimSensor, K::Scan | K::Status | K::Error) => &[Rn],
        _ => return Err(DenialReason::KindNotAllowedOnChannel),
    };
    Ok(to.iter().copied().collect())
}

pub fn sample_payload(kind: MessageKind) -> Payload {
    match kind {
        MessageKind::Chat => Payload::chat("probe"),
        MessageKind::Command => Payload::Command { text: "stop".into() },
        MessageKind::Motion => Payload::Motion {
            primitive: Primitive::Halt,
            magnitude: 0.0,
        },
        MessageKind::MapDelta => Payload::MapDelta { cells: vec![] },
        MessageKind::Pose => Payload::Pose { x: 1.0, y: 1.0, theta: 0.0 },
        MessageKind::Image => Payload::Image {
            format: "pgm".into(),
            data: vec![1, 2, 3],
        },
        MessageKind::LiveView => Payload::LiveView {
            format: "pgm".into(),
            data: vec![1],
        },
        MessageKind::Scan => Payload::Scan { ranges: vec![1.0] },
        MessageKind::Status => Payload::status("probe", ""),
        MessageKind::Error => Payload::error("probe", ""),
        MessageKind::Join => Payload::Join { role: Role::Dm },
        MessageKind::Ack => Payload::Ack { of: Uuid::nil() },
    }
}

fn triples() -> impl Iterator<Item = (Role, Channel, MessageKind)> {
    Role::ALL.iter().flat_map(|&r| {
        Channel::ALL
            .iter()
            .flat_map(move |&c| MessageKind::ALL.iter().map(move |&k| (r, c, k)))
    })
}

pub fn routing_table() -> Check {
    let mut n = 0;
    for (r, c, k) in triples() {
        n += 1;
        let want = routing_oracle(r, c, k);
        let got = validate_route(r, c, k);
        let same = match (&want, &got) {
            (Ok(a), RouteDecision::Allowed(b)) => a == b,
            (Err(a), RouteDecision::Denied(b)) => a == b,
            _ => false,
        };
        ensure(same, || format!("({r}, {c}, {k}): oracle {want:?}, matrix {got:?}"))?;
    }
    ensure(n == 420, || format!("{n} triples"))?;
    Ok(format!("{n} triples match"))
}

fn test_world(dir: &std::path::Path) -> std::path::PathBuf {
    write_world(dir, "room.json", &world_json(&room_rows(40, 40), 2.0, 2.0, 0.0))
}

/// All 420 triples through a live `Session`: decision, log record and the
/// set of clients that actually received the frame.
pub fn routing_in_process() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let config = SessionConfig {
        id: Some("route".into()),
        ..SessionConfig::new(test_world(dir.path()), dir.path())
    };
    let mut session = Session::create(&config).map_err(|e| e.to_string())?;
    let mut inboxes = BTreeMap::new();
    for role in Role::HUMAN {
        let (tx, rx) = tokio::sync::mpsc::unbounded_channel();
        session.attach(role, tx).map_err(|e| e.to_string())?;
        inboxes.insert(role, rx);
    }
    let mut ids = Vec::new();
    for (r, c, k) in triples() {
        for rx in inboxes.values_mut() {
            while rx.try_recv().is_ok() {}
        }
        let env = Envelope::new("x", r, c, sample_payload(k));
        let id = env.id;
        let want = routing_oracle(r, c, k);
        let got = session.route(r, env);
        let mut reached = BTreeSet::new();
        for (role, rx) in inboxes.iter_mut() {
            while let Ok(e) = rx.try_recv() {
                if e.id == id && e.from == r {
                    reached.insert(*role);
                }
            }
        }
        let expect_reached: BTreeSet<Role> = match &want {
            Ok(to) => to.iter().copied().filter(|x| x.is_human()).collect(),
            Err(_) => BTreeSet::new(),
        };
        ensure(reached == expect_reached, || {
            format!("({r}, {c}, {k}): reached {reached:?}, expected {expect_reached:?}")
        })?;
        let same = match (&want, &got) {
            (Ok(a), RouteDecision::Allowed(b)) => a == b,
            (Err(a), RouteDecision::Denied(b)) => a == b,
            _ => false,
        };
        ensure(same, || format!("({r}, {c}, {k}): oracle {want:?}, session {got:?}"))?;
        ids.push((id, want));
    }
    session.close(Role::Server);
    let log = SessionLog::read(session.log_path()).map_err(|e| e.to_string())?;
    let by_id: BTreeMap<Uuid, _> = log.records.iter().map(|r| (r.envelope.id, r)).collect();
    for (id, want) in &ids {
        let rec = by_id.get(id).ok_or_else(|| format!("no log record for {id}"))?;
        match want {
            Ok(to) => ensure(rec.is_delivered() && rec.receivers.iter().copied().collect::<BTreeSet<_>>() == *to, || {
                format!("record {} should be delivered to {to:?}", rec.seq())
            })?,
            Err(reason) => ensure(rec.reason == Some(*reason), || {
                format!("record {} should be denied {reason}", rec.seq())
            })?,
        }
    }
    Ok(format!("420 triples routed and logged in-process ({} log records)", log.records.len()))
}

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

/// Minimal adversarial client: sends hand-built frames, keeps everything it gets.
pub struct RawClient {
    ws: Ws,
    pub received: Vec<Envelope>,
    cursor: usize,
}

impl RawClient {
    pub async fn connect(url: &str) -> Result<RawClient, String> {
        let (ws, _) = tokio_tungstenite::connect_async(url).await.map_err(|e| e.to_string())?;
        Ok(RawClient {
            ws,
            received: Vec::new(),
            cursor: 0,
        })
    }

    pub async fn send_text(&mut self, text: String) -> Result<(), String> {
        self.ws.send(Message::Text(text.into())).await.map_err(|e| e.to_string())
    }

    pub async fn send(&mut self, env: &Envelope) -> Result<(), String> {
        self.send_text(String::from_utf8(encode(env)).unwrap()).await
    }

    async fn pull(&mut self, deadline: tokio::time::Instant) -> Result<(), String> {
        loop {
            match tokio::time::timeout_at(deadline, self.ws.next()).await {
                Err(_) => return Err("timed out".into()),
                Ok(Some(Ok(Message::Text(t)))) => {
                    self.received.push(decode(t.as_bytes()).map_err(|e| e.to_string())?);
                    return Ok(());
                }
                Ok(Some(Ok(Message::Close(_)))) | Ok(None) => return Err("closed".into()),
                Ok(Some(Err(e))) => return Err(e.to_string()),
                Ok(Some(Ok(_))) => {}
            }
        }
    }

    /// Next frame (after the previous match) satisfying `pred`.
    pub async fn next_matching(&mut self, pred: impl Fn(&Envelope) -> bool, timeout: Duration) -> Result<Envelope, String> {
        let deadline = tokio::time::Instant::now() + timeout;
        loop {
            while self.cursor < self.received.len() {
                let e = &self.received[self.cursor];
                self.cursor += 1;
                if pred(e) {
                    return Ok(e.clone());
                }
            }
            self.pull(deadline).await?;
        }
    }

    /// Read until `quiet` passes with no frame or the socket closes.
    pub async fn drain(&mut self, quiet: Duration) {
        loop {
            let deadline = tokio::time::Instant::now() + quiet;
            if self.pull(deadline).await.is_err() {
                return;
            }
        }
    }

    pub async fn close_session(&mut self) -> Result<(), String> {
        let frame = CloseFrame {
            code: CloseCode::from(4000),
            reason: "done".into(),
        };
        self.ws.send(Message::Close(Some(frame))).await.map_err(|e| e.to_string())
    }
}

fn is_reply(e: &Envelope) -> bool {
    e.channel == Channel::ServerCtrl && matches!(e.kind(), MessageKind::Ack | MessageKind::Error)
}

/// Every triple whose sender is a client role, sent over real sockets.
/// The server stamps `from` with the connection's role, so the claimed
/// sender in the frame is deliberately wrong half the time.
pub async fn routing_live() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let server = start_server(&test_world(dir.path()), dir.path(), "adv", 50).await;
    let mut clients = BTreeMap::new();
    for role in Role::HUMAN {
        clients.insert(role, RawClient::connect(&server.attach_url(role)).await?);
    }
    for (role, c) in clients.iter_mut() {
        c.next_matching(|e| matches!(&e.payload, Payload::Status { code, .. } if code == "running"), Duration::from_secs(5))
            .await
            .map_err(|e| format!("{role} never saw running: {e}"))?;
    }
    let mut sent = Vec::new();
    let mut denied = 0;
    for (r, c, k) in triples().filter(|(r, _, _)| r.is_human()) {
        let claimed = if sent.len() % 2 == 0 { r } else { Role::Server };
        let env = Envelope::new("spoof", claimed, c, sample_payload(k));
        let client = clients.get_mut(&r).unwrap();
        client.send(&env).await?;
        let reply = client.next_matching(is_reply, Duration::from_secs(5)).await?;
        let want = routing_oracle(r, c, k);
        match (&want, &reply.payload) {
            (Ok(_), Payload::Ack { of }) if *of == env.id => {}
            (Err(reason), Payload::Error { code, .. }) if code == reason.as_str() => denied += 1,
            _ => return Err(format!("({r}, {c}, {k}): expected {want:?}, got {:?}", reply.payload)),
        }
        sent.push((env.id, r, want));
    }
    for c in clients.values_mut() {
        c.drain(Duration::from_millis(150)).await;
    }
    for (id, from, want) in &sent {
        for (role, client) in &clients {
            let got = client.received.iter().any(|e| e.id == *id && e.from == *from);
            let should = matches!(want, Ok(to) if to.contains(role));
            ensure(got == should, || format!("frame {id} from {from}: {role} received={got}, expected {should}"))?;
        }
    }
    clients.get_mut(&Role::Dm).unwrap().close_session().await?;
    let summary = tokio::time::timeout(Duration::from_secs(5), server.wait())
        .await
        .map_err(|_| "server did not close".to_string())?;
    let logged_denials: u64 = summary.denied.values().sum();
    ensure(logged_denials == denied, || format!("{logged_denials} denials logged, {denied} replied"))?;
    Ok(format!("{} client-role triples over live sockets, {denied} denied", sent.len()))
}

pub async fn routing_all() -> Check {
    let t = Instant::now();
    let a = routing_table()?;
    let b = routing_in_process()?;
    let c = routing_live().await?;
    let elapsed = t.elapsed();
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("{a}; {b}; {c}; {:.2} s", elapsed.as_secs_f64()))
}

// ------------------------------------------------------------- guidelines

pub fn reference_utterances() -> Check {
    let rules = Rules::default_rules();
    type Case = (&'static str, &'static str, fn(&Verdict) -> bool);
    let cases: [Case; 3] = [
        ("move forward five feet", "R5", |o| *o == Verdict::Executable("move forward 1.524 m".into())),
        ("turn left here", "R2", |o| matches!(o, Verdict::Clarify(_))),
        ("Can you send me a picture of what you see?", "R1", |o| *o == Verdict::Executable("send image".into())),
    ];
    let mut parts = Vec::new();
    for (utterance, rule, ok) in cases {
        let d = rules.classify(utterance);
        ensure(d.rule_id == rule && ok(&d.outcome), || {
            format!("{utterance:?} -> {} {:?}, expected {rule}", d.rule_id, d.outcome)
        })?;
        parts.push(format!("{utterance:?}->{}", d.rule_id));
    }
    Ok(parts.join(", "))
}

// ---------------------------------------------------------------- parser

const WORDS: [&str; 20] = [
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
    "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen", "twenty",
];

fn random_command(rng: &mut ChaCha8Rng) -> Command {
    match rng.random_range(0..4) {
        0 => Command::Move {
            direction: if rng.random() { LinearDirection::Forward } else { LinearDirection::Back },
            distance: Thousandths::new(rng.random_range(1..=10_000_000)).unwrap(),
        },
        1 => Command::Turn {
            direction: if rng.random() { TurnDirection::Left } else { TurnDirection::Right },
            angle: Thousandths::new(rng.random_range(1..=360_000)).unwrap(),
        },
        2 => Command::Stop,
        _ => Command::SendImage,
    }
}

pub fn parser_properties() -> Check {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0a11ce);

    let hook = panic::take_hook();
    panic::set_hook(Box::new(|_| {}));
    let mut panics = 0;
    let mut accepted = 0;
    for _ in 0..100_000 {
        let len = rng.random_range(0..48);
        let bytes: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        let text = String::from_utf8_lossy(&bytes).into_owned();
        match panic::catch_unwind(|| command::parse(&text)) {
            Ok(Ok(_)) => accepted += 1,
            Ok(Err(e)) => {
                if e.span.end > text.chars().count() || e.span.start > e.span.end {
                    panic::set_hook(hook);
                    return Err(format!("bad span {:?} for {text:?}", e.span));
                }
            }
            Err(_) => panics += 1,
        }
    }
    panic::set_hook(hook);
    ensure(panics == 0, || format!("{panics} panics while fuzzing"))?;

    for _ in 0..10_000 {
        let cmd = random_command(&mut rng);
        let text = command::format(&cmd);
        let back = command::parse(&text).map_err(|e| format!("{text:?}: {e}"))?;
        ensure(back == cmd, || format!("{text:?} parsed to {back:?}, expected {cmd:?}"))?;
    }

    let mut agreements = 0;
    for (i, word) in WORDS.iter().enumerate() {
        let n = i + 1;
        for template in [
            "move forward {} feet",
            "go back {} meters",
            "drive ahead {} m",
            "turn left {} degrees",
            "rotate right {} deg",
        ] {
            let a = command::parse(&template.replace("{}", word));
            let b = command::parse(&template.replace("{}", &n.to_string()));
            ensure(a.is_ok() && a == b, || format!("{template} with {word}: {a:?} vs {b:?}"))?;
            agreements += 1;
        }
    }
    let elapsed = t.elapsed();
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "1e5 fuzz inputs without panic ({accepted} accepted), 1e4 round-trips, {agreements} word/numeral pairs; {:.2} s",
        elapsed.as_secs_f64()
    ))
}

// ------------------------------------------------------------------- sim

/// Walled room with random rectangular obstacles.
pub fn cluttered_rows(rng: &mut ChaCha8Rng, w: usize, h: usize, boxes: usize) -> Vec<String> {
    let mut grid: Vec<Vec<u8>> = room_rows(w, h).into_iter().map(String::into_bytes).collect();
    for _ in 0..boxes {
        let bw = rng.random_range(1..6);
        let bh = rng.random_range(1..6);
        let x0 = rng.random_range(1..w - 1 - bw);
        let y0 = rng.random_range(1..h - 1 - bh);
        for row in grid.iter_mut().skip(y0).take(bh) {
            for cell in row.iter_mut().skip(x0).take(bw) {
                *cell = b'#';
            }
        }
    }
    grid.into_iter().map(|r| String::from_utf8(r).unwrap()).collect()
}

fn make_world(rows: &[String], x: f64, y: f64, theta: f64) -> World {
    World::from_file(&WorldFile {
        resolution: 0.1,
        start: sim::StartPose { x, y, theta },
        rows: rows.to_vec(),
        robot: None,
    })
    .unwrap()
}

pub fn raycast_vs_marching() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rows = cluttered_rows(&mut rng, 80, 80, 40);
    let oracle = OracleGrid::from_rows(&rows, 0.1);
    let world = make_world(&rows, 0.5, 0.5, 0.0);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    while cases < 1000 {
        let x = rng.random_range(0.1..7.9);
        let y = rng.random_range(0.1..7.9);
        if oracle.occupied_at(x, y) {
            continue;
        }
        let bearing = rng.random_range(0.0..360.0);
        let got = raycast(&world.grid, x, y, bearing, 8.0).map_err(|_| "origin occupied".to_string())?;
        let want = oracle.march(x, y, bearing, 8.0);
        let err = (got - want).abs();
        worst = worst.max(err);
        ensure(err <= 1e-3, || format!("ray from ({x}, {y}) at {bearing} deg: {got} vs oracle {want}"))?;
        cases += 1;
    }
    Ok(format!("1000 rays, max |err| {worst:.2e} m"))
}

pub fn blocked_translate_vs_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rows = cluttered_rows(&mut rng, 80, 80, 30);
    let oracle = OracleGrid::from_rows(&rows, 0.1);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    while cases < 200 {
        let x = rng.random_range(0.3..7.7);
        let y = rng.random_range(0.3..7.7);
        if oracle.disc_overlaps(x, y, 0.2) {
            continue;
        }
        let theta = rng.random_range(0.0..360.0);
        let mut sim = Sim::new(make_world(&rows, x, y, theta), 50);
        let heading = sim.pose().theta;
        let first = sim.execute(Motion::Translate(20.0)).map_err(|e| e.to_string())?;
        let outcome = match first {
            Some(report) => report.outcome,
            None => loop {
                if let Some(report) = sim.step() {
                    break report.outcome;
                }
            },
        };
        let Outcome::Blocked { traveled } = outcome else {
            return Err(format!("({x}, {y}, {theta}): expected blocked, got {outcome:?}"));
        };
        let contact = oracle.contact_distance(x, y, heading, 0.2, 20.0);
        let err = (traveled - contact).abs();
        worst = worst.max(err);
        ensure(err <= 0.025, || format!("({x}, {y}, {theta}): traveled {traveled}, oracle contact {contact}"))?;
        let p = sim.pose();
        ensure(!oracle.disc_overlaps(p.x, p.y, 0.2), || format!("robot overlaps at {p:?}"))?;
        cases += 1;
    }
    Ok(format!("200 blocked translates, max |err| {worst:.4} m"))
}

pub fn dead_reckoning_closed_form() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let rows = room_rows(200, 200);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let mut sim = Sim::new(make_world(&rows, 10.0, 10.0, rng.random_range(0.0..360.0)), 50);
        let (mut x, mut y, mut th) = (sim.pose().x, sim.pose().y, sim.pose().theta);
        for _ in 0..6 {
            let motion = if rng.random() {
                Motion::Rotate(rng.random_range(-180.0..180.0))
            } else {
                Motion::Translate(rng.random_range(-1.5..1.5))
            };
            if sim.execute(motion).map_err(|e| e.to_string())?.is_none() {
                while sim.step().is_none() {}
            }
            match motion {
                Motion::Translate(d) => {
                    let (s, c) = th.to_radians().sin_cos();
                    x += d * c;
                    y += d * s;
                }
                Motion::Rotate(a) => th = (th + a).rem_euclid(360.0),
                Motion::Halt => {}
            }
            let p = sim.pose();
            let err = (p.x - x).abs().max((p.y - y).abs()).max(corpus_angle(p.theta, th));
            worst = worst.max(err);
            ensure(err <= 1e-9, || format!("pose {p:?} vs closed form ({x}, {y}, {th})"))?;
        }
    }
    Ok(format!("100 six-step runs, max |err| {worst:.1e}"))
}

fn corpus_angle(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

pub fn sim_oracles() -> Check {
    let t = Instant::now();
    let a = raycast_vs_marching()?;
    let b = blocked_translate_vs_oracle()?;
    let c = dead_reckoning_closed_form()?;
    let elapsed = t.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("{a}; {b}; {c}; {:.2} s", elapsed.as_secs_f64()))
}

// ------------------------------------------------------------------- e2e

pub async fn end_to_end() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let run = super::run_demo(dir.path()).await;
    let p = &run.participant;
    let images = p.count(Channel::SimSensor, MessageKind::Image);
    let deltas = p.count(Channel::SimSensor, MessageKind::MapDelta);
    let leaks = p.count(Channel::SimSensor, MessageKind::LiveView) + p.count(Channel::SimSensor, MessageKind::Scan);
    ensure(images == 1, || format!("participant got {images} images"))?;
    ensure(deltas >= 1, || "participant got no map_delta".into())?;
    ensure(leaks == 0, || format!("participant got {leaks} live_view/scan frames"))?;
    let clarifications = run
        .dm
        .sent
        .iter()
        .filter(|e| e.channel == Channel::DmPChat && e.payload.text() == Some("How far?"))
        .count();
    ensure(clarifications == 1, || format!("DM clarified {clarifications} times"))?;
    let moved = run.summary.pose.x - 1.0;
    ensure((moved - 1.524).abs() < 1e-9 && (run.summary.pose.y - 1.0).abs() < 1e-9, || {
        format!("final pose {:?}", run.summary.pose)
    })?;
    let log = SessionLog::read(&run.log_path).map_err(|e| e.to_string())?;
    let world = std::fs::read(&run.world_path).unwrap();
    let report = corpus::verify(&log, &world, None, None).map_err(|e| e.to_string())?;
    ensure(report.passed(), || report.text())?;
    ensure(run.elapsed < Duration::from_secs(10), || format!("took {:?}", run.elapsed))?;
    Ok(format!(
        "1 image, {deltas} map deltas, advanced {moved:.3} m, verify ok; {:.2} s",
        run.elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------- replay

/// A session driven in-process with every kind of event the replayer uses.
pub fn scripted_log(dir: &std::path::Path) -> (SessionLog, Vec<u8>, ozbench::session::SessionSummary) {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let rows = cluttered_rows(&mut rng, 60, 60, 12);
    let mut rows = rows;
    // clear a start pocket
    for r in rows.iter_mut().skip(60 - 12).take(10) {
        r.replace_range(1..11, &".".repeat(10));
    }
    let json = world_json(&rows, 0.6, 0.6, 45.0);
    let world_path = write_world(dir, "replay-world.json", &json);
    let config = SessionConfig {
        id: Some("replay".into()),
        tick_ms: 50,
        ..SessionConfig::new(&world_path, dir)
    };
    let mut s = Session::create(&config).unwrap();
    let mut keep = Vec::new();
    for role in Role::HUMAN {
        let (tx, rx) = tokio::sync::mpsc::unbounded_channel();
        s.attach(role, tx).unwrap();
        keep.push(rx);
    }
    let motion = |m: Motion| Envelope::new("", Role::Rn, Channel::RnSimCmd, ozbench::session::motion_payload(m));
    let plan = [
        Motion::Translate(1.0),
        Motion::Rotate(-30.0),
        Motion::Translate(3.0),
        Motion::Rotate(120.0),
        Motion::Translate(-0.5),
        Motion::Translate(2.0),
    ];
    for (i, m) in plan.iter().enumerate() {
        s.route(Role::Participant, Envelope::new("", Role::Participant, Channel::PDmSpeech, Payload::chat("move forward five feet")));
        s.route(Role::Rn, motion(*m));
        for t in 0..(40 + 13 * i) {
            s.tick();
            if t == 5 && i == 2 {
                s.route(Role::Rn, motion(Motion::Rotate(10.0))); // busy
            }
            if t == 20 && i == 5 {
                s.route(Role::Rn, motion(Motion::Halt));
            }
        }
        s.route(Role::Rn, Envelope::new("", Role::Rn, Channel::RnSimCmd, Payload::status("capture_image", "")));
        s.route(Role::Participant, Envelope::new("", Role::Participant, Channel::RnSimCmd, Payload::chat("x")));
    }
    let summary = s.close(Role::Dm);
    let log = SessionLog::read(s.log_path()).unwrap();
    (log, json.into_bytes(), summary)
}

pub fn replay_determinism() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let (log, world, live) = scripted_log(dir.path());
    let a = replay(&log, &world).map_err(|e| e.to_string())?;
    let b = replay(&log, &world).map_err(|e| e.to_string())?;
    ensure(a.to_json() == b.to_json(), || "two replays differ".into())?;
    ensure(a == live, || format!("replay {a:?} differs from live {live:?}"))?;

    // Dropping a record leaves a seq gap.
    let mut gapped = log.clone();
    gapped.records.remove(log.records.len() / 2);
    let reparsed = SessionLog::parse(&gapped.to_jsonl());
    ensure(matches!(reparsed, Err(LogError::CorruptLog { .. })), || format!("gap not detected: {reparsed:?}"))?;

    // Editing a commanded rotation changes the replayed end state.
    let mut edited = log.clone();
    let target = edited
        .records
        .iter_mut()
        .find(|r| matches!(r.envelope.payload, Payload::Motion { primitive: Primitive::Rotate, .. }))
        .unwrap();
    if let Payload::Motion { magnitude, .. } = &mut target.envelope.payload {
        *magnitude += 10.0;
    }
    let report = corpus::verify(&edited, &world, None, None).map_err(|e| e.to_string())?;
    ensure(!report.passed(), || "edited magnitude not detected".into())?;

    // A different world is refused.
    let other = world_json(&room_rows(30, 30), 1.0, 1.0, 0.0).into_bytes();
    ensure(matches!(replay(&log, &other), Err(LogError::WorldMismatch { .. })), || "world mismatch not detected".into())?;

    Ok(format!("{} records, identical summaries, gap/edit/world tampering detected", log.records.len()))
}

// ---------------------------------------------------------------- golden

pub struct Fixture {
    pub name: &'static str,
    pub world: &'static str,
    pub pose: (f64, f64, f64),
}

pub const FIXTURES: [Fixture; 3] = [
    Fixture { name: "corridor_start", world: "worlds/corridor.json", pose: (1.0, 1.0, 0.0) },
    Fixture { name: "office_start", world: "worlds/office.json", pose: (1.5, 1.5, 90.0) },
    Fixture { name: "office_east_room", world: "worlds/office.json", pose: (4.5, 2.5, 200.0) },
];

pub fn render_fixture(f: &Fixture) -> (Vec<u8>, World) {
    let bytes = std::fs::read(repo_file(f.world)).unwrap();
    let world = sim::parse_world(&bytes).unwrap();
    let pose = Pose::new(f.pose.0, f.pose.1, f.pose.2);
    (capture_image(&world.grid, &pose).to_pgm(), world)
}

pub fn golden_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("tests/golden/{name}.pgm"))
}

/// Every column must match the formula rendered at the marching-oracle
/// range, or at that range +/- 1e-3 m where a pixel boundary falls inside
/// the oracle's error bar.
fn matches_oracle(f: &Fixture, pgm: &[u8]) -> Result<(), String> {
    let bytes = std::fs::read(repo_file(f.world)).unwrap();
    let file: WorldFile = serde_json::from_slice(&bytes).unwrap();
    let oracle = OracleGrid::from_rows(&file.rows, file.resolution);
    let frame = sim::ImageFrame::from_pgm(pgm).ok_or("not a 160x120 PGM")?;
    for col in 0..160 {
        let bearing = f.pose.2 + 45.0 - (col as f64 + 0.5) * 90.0 / 160.0;
        let r = oracle.march(f.pose.0, f.pose.1, bearing, 8.0);
        let got: Vec<u8> = (0..120).map(|row| frame.pixel(col, row)).collect();
        let ok = [r, r - 1e-3, r + 1e-3].iter().any(|&rr| camera_column(rr) == got);
        ensure(ok, || format!("{}: column {col} disagrees with oracle range {r}", f.name))?;
    }
    Ok(())
}

pub fn golden_images() -> Check {
    let bless = std::env::var_os("OZBENCH_BLESS").is_some();
    let mut parts = Vec::new();
    for f in &FIXTURES {
        let (pgm, _) = render_fixture(f);
        matches_oracle(f, &pgm)?;
        let again = render_fixture(f).0;
        ensure(again == pgm, || format!("{}: two renders differ", f.name))?;
        let path = golden_path(f.name);
        if bless {
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            std::fs::write(&path, &pgm).unwrap();
        }
        let golden = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        ensure(golden == pgm, || format!("{}: differs from golden file", f.name))?;
        parts.push(format!("{} sha256 {}", f.name, &ozbench::session::sha256_hex(&pgm)[..12]));
    }
    Ok(parts.join(", "))
}
