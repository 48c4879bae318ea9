//! Wall-clock drivers for running the roles over a real transport.
//!
//! The controller runs a send loop on the calling thread and a receive loop
//! on a helper thread; the host is a single receive loop.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use super::{Controller, HapticActuation, Host, SessionError, SessionLog};
use crate::codec::MotionFrame;
use crate::gesture::GestureEvent;
use crate::netsim::udp::Transport;
use crate::netsim::Micros;

pub trait Clock: Send + Sync {
    fn now_us(&self) -> Micros;
}

/// UNIX wall clock.
#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_us(&self) -> Micros {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_micros() as Micros)
            .unwrap_or(0)
    }
}

pub struct ControllerSession<T: Transport + 'static, C: Clock + 'static> {
    pub controller: Controller,
    pub rate_hz: f64,
    pub source: Vec<MotionFrame>,
    pub transport: Arc<T>,
    pub clock: Arc<C>,
    /// How long to keep listening for haptic triggers after the last frame.
    pub linger: Duration,
}

const POLL: Duration = Duration::from_millis(20);

/// Sends `ceil(duration_s * rate)` frames at the configured cadence and
/// collects haptic triggers until `linger` after the last send.
pub fn run_controller<T: Transport + 'static, C: Clock + 'static>(
    session: ControllerSession<T, C>,
    duration_s: f64,
) -> Result<(SessionLog, Vec<HapticActuation>), SessionError> {
    let ControllerSession {
        mut controller,
        rate_hz,
        source,
        transport,
        clock,
        linger,
    } = session;
    if !(rate_hz.is_finite() && rate_hz > 0.0) {
        return Err(SessionError::InvalidConfig(format!("rate must be > 0, got {rate_hz}")));
    }
    let frames = super::sim::SimConfig::frames_for_duration(duration_s, rate_hz);
    if source.len() < frames {
        return Err(SessionError::SourceExhausted {
            needed: frames,
            available: source.len(),
        });
    }

    let stop = Arc::new(AtomicBool::new(false));
    let (tx, rx) = mpsc::channel::<(Vec<u8>, Micros)>();
    let receiver = {
        let stop = Arc::clone(&stop);
        let transport = Arc::clone(&transport);
        let clock = Arc::clone(&clock);
        std::thread::spawn(move || -> Result<(), SessionError> {
            while !stop.load(Ordering::Relaxed) {
                if let Some(bytes) = transport.recv_timeout(POLL)? {
                    let _ = tx.send((bytes, clock.now_us()));
                }
            }
            Ok(())
        })
    };

    let start = Instant::now();
    let period = Duration::from_secs_f64(1.0 / rate_hz);
    let mut result = Ok(());
    for (k, sample) in source.iter().take(frames).enumerate() {
        let deadline = start + period * k as u32;
        if let Some(wait) = deadline.checked_duration_since(Instant::now()) {
            std::thread::sleep(wait);
        }
        while let Ok((bytes, at)) = rx.try_recv() {
            controller.on_datagram(&bytes, at);
        }
        let sent = controller
            .emit(sample, clock.now_us())
            .map_err(SessionError::from)
            .and_then(|bytes| transport.send(&bytes).map_err(SessionError::from));
        if let Err(e) = sent {
            result = Err(e);
            break;
        }
    }
    let until = Instant::now() + linger;
    while let Some(left) = until.checked_duration_since(Instant::now()) {
        match rx.recv_timeout(left) {
            Ok((bytes, at)) => {
                controller.on_datagram(&bytes, at);
            }
            Err(mpsc::RecvTimeoutError::Timeout) => break,
            Err(mpsc::RecvTimeoutError::Disconnected) => break,
        }
    }
    stop.store(true, Ordering::Relaxed);
    let recv_result = receiver.join().unwrap_or(Ok(()));
    result?;
    recv_result?;
    while let Ok((bytes, at)) = rx.try_recv() {
        controller.on_datagram(&bytes, at);
    }
    Ok(controller.into_parts())
}

pub struct HostSession<T: Transport, C: Clock> {
    pub host: Host,
    pub transport: Arc<T>,
    pub clock: Arc<C>,
    /// Stop after this long without a datagram, once the first one arrived.
    pub idle_timeout: Duration,
    /// Give up if nothing arrives at all within this long.
    pub start_timeout: Duration,
    /// Stop after this many received motion frames.
    pub max_frames: Option<u64>,
}

/// Receives frames until idle, replying to each gesture with a haptic
/// trigger and handing the event to `action_sink`.
pub fn run_host<T: Transport, C: Clock>(
    session: HostSession<T, C>,
    mut action_sink: impl FnMut(&GestureEvent),
) -> Result<(SessionLog, Vec<GestureEvent>), SessionError> {
    let HostSession {
        mut host,
        transport,
        clock,
        idle_timeout,
        start_timeout,
        max_frames,
    } = session;
    let started = Instant::now();
    let mut last_rx: Option<Instant> = None;
    loop {
        if let Some(max) = max_frames {
            if host.log().counters.received >= max {
                break;
            }
        }
        let deadline = match last_rx {
            Some(t) => t + idle_timeout,
            None => started + start_timeout,
        };
        let Some(left) = deadline.checked_duration_since(Instant::now()) else {
            break;
        };
        let Some(bytes) = transport.recv_timeout(left.min(POLL * 5))? else {
            continue;
        };
        last_rx = Some(Instant::now());
        let out = host.on_datagram(&bytes, clock.now_us());
        if let Some(ev) = &out.event {
            action_sink(ev);
        }
        if let Some((frame_seq, reply)) = out.reply {
            transport.send(&reply)?;
            host.record_haptic_sent(frame_seq, clock.now_us());
        }
    }
    Ok(host.into_parts())
}
