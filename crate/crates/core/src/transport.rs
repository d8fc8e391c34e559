//! Simulated message links between watches, phones and the server.
//!
//! Delivery is decided at send time from the link's outage list and the
//! caller's rng. Internet messages sent during an outage are dropped unless
//! the link is in store-and-forward mode, in which case they leave when the
//! outage ends.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::{Duration, SimTime, Span};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("{endpoint} is not attached to the {link:?} link")]
    UnknownEndpoint { endpoint: Endpoint, link: LinkKind },
    #[error("invalid link: {0}")]
    InvalidLink(String),
    #[error("invalid {kind:?} payload: {msg}")]
    Payload { kind: MessageKind, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Partner {
    Male,
    Female,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Endpoint {
    Watch(Partner),
    Phone(Partner),
    Server,
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Watch(p) => write!(f, "watch-{p:?}"),
            Endpoint::Phone(p) => write!(f, "phone-{p:?}"),
            Endpoint::Server => f.write_str("server"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkKind {
    Ble,
    DataLayer,
    Internet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    ConfigHours,
    BleHandshakeAck,
    StartPeerRecording,
    RecordingDoneIntent,
    ShowSelfReport,
    SelfReportStarted,
    SelfReportCompleted,
    Ack,
    LogText,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub kind: MessageKind,
    pub sender: Endpoint,
    pub receiver: Endpoint,
    pub payload: Vec<u8>,
    pub sent_at: SimTime,
}

impl Message {
    pub fn new(kind: MessageKind, sender: Endpoint, receiver: Endpoint, payload: Vec<u8>, sent_at: SimTime) -> Self {
        Message {
            kind,
            sender,
            receiver,
            payload,
            sent_at,
        }
    }

    /// Message about one recording; the payload is its start time.
    pub fn about_recording(kind: MessageKind, sender: Endpoint, receiver: Endpoint, start: SimTime, sent_at: SimTime) -> Self {
        Message::new(kind, sender, receiver, start.as_ms().to_be_bytes().to_vec(), sent_at)
    }

    /// ConfigHours carries a comma-separated list of hours of day.
    pub fn config_hours(sender: Endpoint, receiver: Endpoint, hours: &[u32], sent_at: SimTime) -> Self {
        let text = hours.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(",");
        Message::new(MessageKind::ConfigHours, sender, receiver, text.into_bytes(), sent_at)
    }

    pub fn recording_start(&self) -> Option<SimTime> {
        let bytes: [u8; 8] = self.payload.as_slice().try_into().ok()?;
        Some(SimTime::from_ms(u64::from_be_bytes(bytes)))
    }

    pub fn validate(&self) -> Result<(), TransportError> {
        let err = |msg: &str| TransportError::Payload {
            kind: self.kind,
            msg: msg.to_string(),
        };
        match self.kind {
            MessageKind::ConfigHours => {
                let text = std::str::from_utf8(&self.payload).map_err(|_| err("not utf-8"))?;
                for part in text.split(',').filter(|s| !s.is_empty()) {
                    let h: u32 = part.parse().map_err(|_| err("not an hour list"))?;
                    if h > 23 {
                        return Err(err("hour out of range"));
                    }
                }
                Ok(())
            }
            MessageKind::BleHandshakeAck | MessageKind::Ack => {
                if self.payload.is_empty() {
                    Ok(())
                } else {
                    Err(err("expected empty payload"))
                }
            }
            MessageKind::StartPeerRecording
            | MessageKind::RecordingDoneIntent
            | MessageKind::ShowSelfReport
            | MessageKind::SelfReportStarted
            | MessageKind::SelfReportCompleted => {
                if self.payload.len() == 8 {
                    Ok(())
                } else {
                    Err(err("expected 8-byte recording start"))
                }
            }
            MessageKind::LogText => std::str::from_utf8(&self.payload).map(|_| ()).map_err(|_| err("not utf-8")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub kind: LinkKind,
    pub latency_ms: u64,
    pub jitter_ms: u64,
    pub drop_prob: f64,
    pub outages: Vec<Span>,
    pub ends: (Endpoint, Endpoint),
    pub store_and_forward: bool,
}

impl Link {
    /// Default one-way latency: BLE 50 ms, data layer 200 ms, internet 500 ms.
    pub fn new(kind: LinkKind, a: Endpoint, b: Endpoint) -> Self {
        let latency_ms = match kind {
            LinkKind::Ble => 50,
            LinkKind::DataLayer => 200,
            LinkKind::Internet => 500,
        };
        Link {
            kind,
            latency_ms,
            jitter_ms: 0,
            drop_prob: 0.0,
            outages: Vec::new(),
            ends: (a, b),
            store_and_forward: false,
        }
    }

    pub fn validate(&self) -> Result<(), TransportError> {
        if !(0.0..=1.0).contains(&self.drop_prob) {
            return Err(TransportError::InvalidLink(format!("drop_prob {} outside [0, 1]", self.drop_prob)));
        }
        for w in self.outages.windows(2) {
            if w[0].end > w[1].start {
                return Err(TransportError::InvalidLink("outages overlap or are unsorted".into()));
            }
        }
        if self.outages.iter().any(|o| o.end < o.start) {
            return Err(TransportError::InvalidLink("outage ends before it starts".into()));
        }
        Ok(())
    }

    pub fn outage_at(&self, t: SimTime) -> Option<&Span> {
        self.outages.iter().find(|o| o.contains(t))
    }

    pub fn attaches(&self, e: Endpoint) -> bool {
        self.ends.0 == e || self.ends.1 == e
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DropReason {
    Random,
    Outage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Delivery {
    Delivered { at: SimTime },
    Dropped(DropReason),
}

/// Decides delivery of `msg` over `link`. Draws exactly one drop variate and,
/// when jitter is configured, one jitter variate per call.
pub fn send<R: Rng>(link: &Link, msg: &Message, rng: &mut R) -> Result<Delivery, TransportError> {
    for e in [msg.sender, msg.receiver] {
        if !link.attaches(e) {
            return Err(TransportError::UnknownEndpoint {
                endpoint: e,
                link: link.kind,
            });
        }
    }
    let dropped = rng.gen::<f64>() < link.drop_prob;
    let jitter = if link.jitter_ms > 0 {
        rng.gen_range(0..=link.jitter_ms)
    } else {
        0
    };
    let departs = match link.outage_at(msg.sent_at) {
        Some(o) if link.store_and_forward => o.end,
        Some(_) => return Ok(Delivery::Dropped(DropReason::Outage)),
        None => msg.sent_at,
    };
    if dropped {
        return Ok(Delivery::Dropped(DropReason::Random));
    }
    Ok(Delivery::Delivered {
        at: departs.plus(Duration::from_ms(link.latency_ms + jitter)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BleConfig {
    pub failure_prob: f64,
    pub failure_cap: u32,
}

impl Default for BleConfig {
    fn default() -> Self {
        BleConfig {
            failure_prob: 0.1,
            failure_cap: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BleConnectionState {
    pub consecutive_failures: u32,
    pub stack_generation: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BleOutcome {
    Connected,
    Failed,
    StackResetPerformed,
}

/// One connection attempt. Missing proximity counts as a failed attempt; the
/// stack is rebuilt when the consecutive failures reach the cap.
pub fn ble_connect<R: Rng>(
    state: BleConnectionState,
    proximity_ok: bool,
    cfg: &BleConfig,
    rng: &mut R,
) -> (BleConnectionState, BleOutcome) {
    let fail_draw = rng.gen::<f64>() < cfg.failure_prob;
    if proximity_ok && !fail_draw {
        return (
            BleConnectionState {
                consecutive_failures: 0,
                ..state
            },
            BleOutcome::Connected,
        );
    }
    let failures = state.consecutive_failures + 1;
    if failures >= cfg.failure_cap.max(1) {
        (
            BleConnectionState {
                consecutive_failures: 0,
                stack_generation: state.stack_generation + 1,
            },
            BleOutcome::StackResetPerformed,
        )
    } else {
        (
            BleConnectionState {
                consecutive_failures: failures,
                ..state
            },
            BleOutcome::Failed,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Server {
    pub hung_up: bool,
}

impl Server {
    pub fn hang_up(&mut self) {
        self.hung_up = true;
    }

    pub fn restart(&mut self) {
        self.hung_up = false;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NotShownReason {
    WatchToPhoneDropped,
    InternetUnavailable,
    InternetDropped,
    ServerHangup,
    TooLate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RelayOutcome {
    Shown { at: SimTime },
    NotShown(NotShownReason),
}

/// The links one partner's self-report trigger travels over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfReportPath {
    pub partner: Partner,
    pub data_layer: Link,
    pub internet: Link,
}

impl SelfReportPath {
    pub fn new(partner: Partner) -> Self {
        SelfReportPath {
            partner,
            data_layer: Link::new(LinkKind::DataLayer, Endpoint::Watch(partner), Endpoint::Phone(partner)),
            internet: Link::new(LinkKind::Internet, Endpoint::Phone(partner), Endpoint::Server),
        }
    }
}

/// Watch to phone, phone to server, server back to phone. The survey is
/// shown only if every hop arrives and the whole trip fits in `window`.
pub fn relay_selfreport_trigger<R: Rng>(
    path: &SelfReportPath,
    server: &Server,
    recording_start: SimTime,
    sent_at: SimTime,
    window: Duration,
    rng: &mut R,
    log: &mut Vec<MessageTrace>,
) -> RelayOutcome {
    let watch = Endpoint::Watch(path.partner);
    let phone = Endpoint::Phone(path.partner);
    let hops = [
        (&path.data_layer, MessageKind::RecordingDoneIntent, watch, phone),
        (&path.internet, MessageKind::RecordingDoneIntent, phone, Endpoint::Server),
        (&path.internet, MessageKind::ShowSelfReport, Endpoint::Server, phone),
    ];
    let mut t = sent_at;
    for (i, (link, kind, from, to)) in hops.into_iter().enumerate() {
        if i == 2 && server.hung_up {
            return RelayOutcome::NotShown(NotShownReason::ServerHangup);
        }
        let msg = Message::about_recording(kind, from, to, recording_start, t);
        let outcome = send(link, &msg, rng).expect("self-report path endpoints are attached");
        log.push(MessageTrace {
            at: t,
            link: link.kind,
            kind,
            outcome,
        });
        match outcome {
            Delivery::Delivered { at } => t = at,
            Delivery::Dropped(reason) => {
                return RelayOutcome::NotShown(match (link.kind, reason) {
                    (LinkKind::Internet, DropReason::Outage) => NotShownReason::InternetUnavailable,
                    (LinkKind::Internet, DropReason::Random) => NotShownReason::InternetDropped,
                    _ => NotShownReason::WatchToPhoneDropped,
                })
            }
        }
    }
    if t.saturating_sub(sent_at) > window {
        RelayOutcome::NotShown(NotShownReason::TooLate)
    } else {
        RelayOutcome::Shown { at: t }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageTrace {
    pub at: SimTime,
    pub link: LinkKind,
    pub kind: MessageKind,
    pub outcome: Delivery,
}
