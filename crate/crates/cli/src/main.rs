//! `motionlink`: trace generation, frame inspection, simulated and UDP
//! sessions, and log analysis.
//!
//! Exit codes: 0 ok, 1 usage, 2 I/O, 3 protocol or analysis error.

mod config;
mod inspect;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use motionlink::codec::{self, CipherSuite, SessionKey};
use motionlink::gesture::{Axis, DetectorConfig};
use motionlink::latlab::{self, ReportFormat};
use motionlink::netsim::{DelayShape, UdpTransport};
use motionlink::session::live::{self, ControllerSession, HostSession, SystemClock};
use motionlink::session::sim::{simulate, SimConfig};
use motionlink::session::{merge_logs, Controller, Host, SessionError, SessionLog};
use motionlink::trace::{self, TraceError, TraceSpec};

use crate::config::SimFile;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Protocol(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Protocol(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Protocol(m) => m,
        }
    }
}

impl From<SessionError> for CliError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Io(e) => CliError::Io(e.to_string()),
            SessionError::InvalidConfig(m) => CliError::Usage(m),
            other => CliError::Protocol(other.to_string()),
        }
    }
}

impl From<TraceError> for CliError {
    fn from(e: TraceError) -> Self {
        match e {
            TraceError::Io(e) => CliError::Io(e.to_string()),
            TraceError::InvalidSpec(m) => CliError::Usage(m),
            other => CliError::Protocol(other.to_string()),
        }
    }
}

impl From<latlab::LatError> for CliError {
    fn from(e: latlab::LatError) -> Self {
        CliError::Protocol(e.to_string())
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Parser)]
#[command(name = "motionlink", version, about = "Phone-style motion controller pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic IMU trace as CSV.
    GenTrace(GenTraceArgs),
    /// Decode one frame (hex string, hex file or binary file) field by field.
    Inspect(InspectArgs),
    /// Run a whole session in virtual time and print the latency report.
    Sim(SimArgs),
    /// Host role over UDP.
    Serve(ServeArgs),
    /// Controller role over UDP.
    Control(ControlArgs),
    /// Latency report from stored session logs.
    Analyze(AnalyzeArgs),
    /// Offered load of a fixed-size frame stream.
    Throughput(ThroughputArgs),
}

#[derive(Args, Clone)]
struct TraceArgs {
    /// Number of half-sine gestures in the generated trace.
    #[arg(long, default_value_t = 0)]
    gestures: usize,
    /// Onset of the first gesture, s.
    #[arg(long, default_value_t = 2.0)]
    first_onset: f64,
    /// Gap between gesture onsets, s.
    #[arg(long, default_value_t = 5.0)]
    spacing: f64,
    /// Gesture peak, m/s^2.
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
    /// Gesture width, ms.
    #[arg(long, default_value_t = 200.0)]
    width_ms: f64,
    /// Accelerometer noise sigma, m/s^2.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Seed for the trace noise.
    #[arg(long, default_value_t = 0)]
    trace_seed: u64,
}

impl TraceArgs {
    fn spec(&self, duration_s: f64, rate_hz: f64) -> TraceSpec {
        TraceSpec {
            duration_s,
            rate_hz,
            noise_sigma: self.noise,
            seed: self.trace_seed,
            ..Default::default()
        }
        .with_pulse_train(
            self.gestures,
            self.first_onset,
            self.spacing,
            self.amplitude,
            self.width_ms,
        )
    }
}

#[derive(Args)]
struct GenTraceArgs {
    #[arg(long, default_value_t = 100.0)]
    duration: f64,
    #[arg(long, default_value_t = 10.0)]
    rate: f64,
    #[command(flatten)]
    trace: TraceArgs,
    /// Output CSV; stdout if omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct KeyArgs {
    /// Shared session secret.
    #[arg(long, default_value = "motionlink")]
    secret: String,
    /// Nonce salt, 16 hex digits.
    #[arg(long, default_value = "0000000000000000")]
    salt: String,
    #[arg(long, default_value_t = 0x4D4C_0001)]
    session_id: u32,
    /// CRC-only frames (no tag check).
    #[arg(long)]
    integrity_only: bool,
}

fn parse_salt(s: &str) -> Result<[u8; 8], CliError> {
    hex::decode(s)
        .ok()
        .and_then(|v| <[u8; 8]>::try_from(v).ok())
        .ok_or_else(|| CliError::Usage(format!("--salt must be 16 hex digits, got {s:?}")))
}

impl KeyArgs {
    fn key(&self) -> Result<SessionKey, CliError> {
        let key = SessionKey::new(self.secret.as_bytes().to_vec(), parse_salt(&self.salt)?);
        Ok(if self.integrity_only {
            key.with_suite(CipherSuite::IntegrityOnly)
        } else {
            key
        })
    }
}

#[derive(Args)]
struct InspectArgs {
    /// Hex string, or a path to a hex or binary frame.
    input: String,
    #[arg(long, default_value = "motionlink")]
    secret: String,
    #[arg(long, default_value = "0000000000000000")]
    salt: String,
}

#[derive(Args, Clone)]
struct DetectorArgs {
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    refractory_ms: Option<u64>,
    #[arg(long)]
    axis: Option<Axis>,
}

impl DetectorArgs {
    fn apply(&self, d: &mut DetectorConfig) {
        if let Some(t) = self.tau {
            d.tau = t;
        }
        if let Some(r) = self.refractory_ms {
            d.refractory_ms = r;
        }
        if let Some(a) = self.axis {
            d.axis = a;
        }
    }
}

#[derive(Args)]
struct SimArgs {
    /// TOML file with the same keys as the flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Frames to send (default 1000).
    #[arg(long, conflicts_with = "duration")]
    frames: Option<usize>,
    /// Session length, s; frames = ceil(duration * rate).
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    rate: Option<f64>,
    /// Replay this CSV trace instead of generating one.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    gen: TraceArgs,
    /// Mean one-way delay, ms.
    #[arg(long)]
    delay: Option<f64>,
    /// Jitter sigma, ms.
    #[arg(long)]
    jitter: Option<f64>,
    /// Lower delay bound, ms.
    #[arg(long)]
    min: Option<f64>,
    /// Upper delay bound, ms.
    #[arg(long)]
    max: Option<f64>,
    #[arg(long)]
    loss: Option<f64>,
    /// Allow reordering.
    #[arg(long)]
    unordered: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// early-skew | gaussian
    #[arg(long)]
    shape: Option<DelayShape>,
    #[arg(long)]
    controller_offset_ms: Option<f64>,
    #[arg(long)]
    controller_drift_ppm: Option<f64>,
    #[arg(long)]
    host_offset_ms: Option<f64>,
    #[arg(long)]
    host_drift_ppm: Option<f64>,
    /// Host time from frame arrival to haptic send, ms.
    #[arg(long)]
    processing_ms: Option<f64>,
    #[command(flatten)]
    detector: DetectorArgs,
    /// text | json | csv
    #[arg(long, default_value = "text")]
    format: ReportFormat,
    /// Directory for controller/host/merged JSONL and the report.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "0.0.0.0:9000")]
    bind: String,
    /// Controller address for haptic replies.
    #[arg(long, default_value = "127.0.0.1:9001")]
    peer: String,
    #[command(flatten)]
    key: KeyArgs,
    #[command(flatten)]
    detector: DetectorArgs,
    /// Stop after this long without traffic, s.
    #[arg(long, default_value_t = 3.0)]
    idle_timeout: f64,
    /// Give up if nothing arrives within this long, s.
    #[arg(long, default_value_t = 60.0)]
    start_timeout: f64,
    #[arg(long)]
    max_frames: Option<u64>,
    /// Host log (JSONL).
    #[arg(long, short, default_value = "host.jsonl")]
    out: PathBuf,
}

#[derive(Args)]
struct ControlArgs {
    #[arg(long, default_value = "0.0.0.0:9001")]
    bind: String,
    /// Host address.
    #[arg(long, default_value = "127.0.0.1:9000")]
    peer: String,
    #[command(flatten)]
    key: KeyArgs,
    #[arg(long, default_value_t = 100.0)]
    duration: f64,
    #[arg(long, default_value_t = 10.0)]
    rate: f64,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    gen: TraceArgs,
    /// Keep listening for haptic triggers this long after the last frame, s.
    #[arg(long, default_value_t = 1.0)]
    linger: f64,
    /// Controller log (JSONL).
    #[arg(long, short, default_value = "controller.jsonl")]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Merged log, or a controller log when --host is given.
    log: PathBuf,
    /// Host log to merge with a controller log.
    #[arg(long)]
    host: Option<PathBuf>,
    #[arg(long, default_value = "text")]
    format: ReportFormat,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ThroughputArgs {
    #[arg(long, default_value_t = 10.0)]
    rate: f64,
    #[arg(long, default_value_t = codec::MOTION_FRAME_LEN as u32)]
    bytes: u32,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::GenTrace(a) => gen_trace(a),
        Command::Inspect(a) => inspect::run(&a.input, &a.secret, parse_salt(&a.salt)?),
        Command::Sim(a) => sim(a),
        Command::Serve(a) => serve(a),
        Command::Control(a) => control(a),
        Command::Analyze(a) => analyze(a),
        Command::Throughput(a) => {
            let t = codec::throughput_report(a.rate, a.bytes).map_err(|e| CliError::Usage(e.to_string()))?;
            print!("{t}");
            Ok(())
        }
    }
}

fn gen_trace(a: GenTraceArgs) -> Result<(), CliError> {
    let frames = trace::generate(&a.trace.spec(a.duration, a.rate))?;
    match &a.out {
        Some(p) => trace::write_csv(&frames, p)?,
        None => trace::write_csv_to(&frames, std::io::stdout().lock())?,
    }
    Ok(())
}

fn load_samples(
    path: Option<&PathBuf>,
    gen: &TraceArgs,
    duration_s: f64,
    rate: f64,
) -> Result<Vec<codec::MotionFrame>, CliError> {
    match path {
        Some(p) => Ok(trace::read_csv(p)?),
        None => Ok(trace::generate(&gen.spec(duration_s, rate))?),
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn report_ext(f: ReportFormat) -> &'static str {
    match f {
        ReportFormat::Text => "txt",
        ReportFormat::Json => "json",
        ReportFormat::Csv => "csv",
    }
}

fn sim(a: SimArgs) -> Result<(), CliError> {
    let mut file = match &a.config {
        Some(p) => SimFile::load(p)?,
        None => SimFile::default(),
    };
    if let Some(r) = a.rate {
        file.rate_hz = r;
    }
    if let Some(d) = a.duration {
        file.frames = SimConfig::frames_for_duration(d, file.rate_hz);
    }
    if let Some(n) = a.frames {
        file.frames = n;
    }
    let link = &mut file.link;
    link.base_delay_ms = a.delay.unwrap_or(link.base_delay_ms);
    link.jitter_sigma_ms = a.jitter.unwrap_or(link.jitter_sigma_ms);
    link.min_delay_ms = a.min.or(link.min_delay_ms);
    link.max_delay_ms = a.max.or(link.max_delay_ms);
    link.loss_prob = a.loss.unwrap_or(link.loss_prob);
    link.seed = a.seed.unwrap_or(link.seed);
    link.shape = a.shape.unwrap_or(link.shape);
    if a.unordered {
        link.ordered = false;
    }
    let cc = &mut file.controller_clock;
    cc.offset_ms = a.controller_offset_ms.unwrap_or(cc.offset_ms);
    cc.drift_ppm = a.controller_drift_ppm.unwrap_or(cc.drift_ppm);
    let hc = &mut file.host_clock;
    hc.offset_ms = a.host_offset_ms.unwrap_or(hc.offset_ms);
    hc.drift_ppm = a.host_drift_ppm.unwrap_or(hc.drift_ppm);
    file.host_processing_ms = a.processing_ms.unwrap_or(file.host_processing_ms);
    a.detector.apply(&mut file.detector);

    let duration_s = file.frames as f64 / file.rate_hz;
    let samples = load_samples(a.trace.as_ref(), &a.gen, duration_s, file.rate_hz)?;
    let cfg = file.into_sim_config(samples)?;
    let out = simulate(&cfg, |_| {})?;
    let analysis = latlab::analyze(&out.merged)?;
    let report = latlab::render_analysis(&analysis, a.format);

    if let Some(dir) = &a.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        for (name, log) in [
            ("controller.jsonl", &out.controller_log),
            ("host.jsonl", &out.host_log),
            ("merged.jsonl", &out.merged),
        ] {
            write_file(&dir.join(name), log.to_jsonl_string().as_bytes())?;
        }
        write_file(&dir.join(format!("report.{}", report_ext(a.format))), report.as_bytes())?;
    }
    print!("{report}");
    Ok(())
}

fn serve(a: ServeArgs) -> Result<(), CliError> {
    let mut detector = DetectorConfig::default();
    a.detector.apply(&mut detector);
    let transport = UdpTransport::new(&a.bind, &a.peer).map_err(|e| CliError::Io(e.to_string()))?;
    eprintln!(
        "listening on {}, replying to {}",
        transport.local_addr(),
        transport.peer_addr()
    );
    let session = HostSession {
        host: Host::new(a.key.session_id, a.key.key()?, detector)?,
        transport: Arc::new(transport),
        clock: Arc::new(SystemClock),
        idle_timeout: secs(a.idle_timeout, "--idle-timeout")?,
        start_timeout: secs(a.start_timeout, "--start-timeout")?,
        max_frames: a.max_frames,
    };
    let (log, events) = live::run_host(session, |ev| {
        println!(
            "gesture {} at t={} ms (peak {:.3})",
            ev.sequence, ev.frame_timestamp_ms, ev.peak_value
        );
    })?;
    log.save(&a.out).map_err(|e| io_err(&a.out, e))?;
    let c = log.counters;
    eprintln!(
        "received {} frames, {} gestures, {} auth failures, {} checksum failures; log {}",
        c.received,
        events.len(),
        c.auth_failures,
        c.checksum_failures,
        a.out.display()
    );
    Ok(())
}

fn control(a: ControlArgs) -> Result<(), CliError> {
    let frames = SimConfig::frames_for_duration(a.duration, a.rate);
    let samples = load_samples(a.trace.as_ref(), &a.gen, a.duration, a.rate)?;
    let transport = UdpTransport::new(&a.bind, &a.peer).map_err(|e| CliError::Io(e.to_string()))?;
    eprintln!("sending {frames} frames at {} Hz to {}", a.rate, transport.peer_addr());
    let session = ControllerSession {
        controller: Controller::new(a.key.session_id, a.key.key()?),
        rate_hz: a.rate,
        source: samples,
        transport: Arc::new(transport),
        clock: Arc::new(SystemClock),
        linger: secs(a.linger, "--linger")?,
    };
    let (log, actuations) = live::run_controller(session, a.duration)?;
    log.save(&a.out).map_err(|e| io_err(&a.out, e))?;
    eprintln!(
        "sent {} frames, {} haptic pulses; log {}",
        log.counters.sent,
        actuations.len(),
        a.out.display()
    );
    Ok(())
}

fn secs(v: f64, flag: &str) -> Result<Duration, CliError> {
    Duration::try_from_secs_f64(v)
        .map_err(|_| CliError::Usage(format!("{flag} must be a non-negative number of seconds")))
}

fn load_log(path: &Path) -> Result<SessionLog, CliError> {
    SessionLog::load(path).map_err(|e| match e {
        SessionError::Io(io) => io_err(path, io),
        other => CliError::Protocol(format!("{}: {other}", path.display())),
    })
}

fn analyze(a: AnalyzeArgs) -> Result<(), CliError> {
    let mut log = load_log(&a.log)?;
    if let Some(h) = &a.host {
        log = merge_logs(&log, &load_log(h)?)?;
    }
    let report = latlab::render_analysis(&latlab::analyze(&log)?, a.format);
    match &a.out {
        Some(p) => write_file(p, report.as_bytes())?,
        None => print!("{report}"),
    }
    Ok(())
}
