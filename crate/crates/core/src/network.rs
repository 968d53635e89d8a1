//! Packet-level model of one network path: Bernoulli drops, random delays
//! and a time-stamp-order receive buffer.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding;

/// Slack when comparing a delivery instant against the polling clock, so
/// that `k*Ts + d` and `(k + d/Ts)*Ts` compare equal.
pub const TIME_EPS: f64 = 1e-9;

/// Rejection sampling gives up and clamps after this many draws.
const MAX_REJECTIONS: usize = 100_000;

/// Delay distribution of a path, all values in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum DelayLaw {
    Uniform { lo: f64, hi: f64 },
    TruncatedNormal { mean: f64, sd: f64, lo: f64, hi: f64 },
    TruncatedExponential { rate: f64, lo: f64, hi: f64 },
    Constant { d: f64 },
}

impl DelayLaw {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            DelayLaw::Uniform { lo, hi }
            | DelayLaw::TruncatedNormal { lo, hi, .. }
            | DelayLaw::TruncatedExponential { lo, hi, .. } => (lo, hi),
            DelayLaw::Constant { d } => (d, d),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bounds();
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidChannel(format!("delay bounds must satisfy 0 <= lo <= hi, got [{lo}, {hi}]")));
        }
        match *self {
            DelayLaw::TruncatedNormal { mean, sd, .. } if !(sd > 0.0 && mean.is_finite()) => {
                Err(Error::InvalidChannel(format!("normal delay needs sd > 0, got {sd}")))
            }
            DelayLaw::TruncatedExponential { rate, .. } if !(rate > 0.0 && rate.is_finite()) => {
                Err(Error::InvalidChannel(format!("exponential delay needs rate > 0, got {rate}")))
            }
            _ => Ok(()),
        }
    }

    /// One delay draw. Truncated laws resample until the draw lies in
    /// `[lo, hi]`.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            DelayLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            DelayLaw::Constant { d } => d,
            DelayLaw::TruncatedNormal { mean, sd, lo, hi } => {
                let dist = Normal::new(mean, sd).expect("validated normal parameters");
                rejection(rng, lo, hi, |r| dist.sample(r))
            }
            DelayLaw::TruncatedExponential { rate, lo, hi } => {
                let dist = Exp::new(rate).expect("validated exponential rate");
                rejection(rng, lo, hi, |r| dist.sample(r))
            }
        }
    }
}

fn rejection(rng: &mut ChaCha8Rng, lo: f64, hi: f64, mut draw: impl FnMut(&mut ChaCha8Rng) -> f64) -> f64 {
    let mut last = lo;
    for _ in 0..MAX_REJECTIONS {
        last = draw(rng);
        if (lo..=hi).contains(&last) {
            return last;
        }
    }
    last.clamp(lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub drop_prob: f64,
    pub delay: DelayLaw,
    /// Extra key mixed into the channel's stream id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ChannelConfig {
    pub fn new(drop_prob: f64, delay: DelayLaw) -> Self {
        Self { drop_prob, delay, seed: None }
    }

    /// Zero delay, no loss.
    pub fn ideal() -> Self {
        Self::new(0.0, DelayLaw::Constant { d: 0.0 })
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.drop_prob) {
            return Err(Error::InvalidChannel(format!("drop probability {} outside [0, 1]", self.drop_prob)));
        }
        self.delay.validate()
    }

    /// Random stream for this channel in a given replicate. `path` tells the
    /// paths of one loop apart when their configs are identical.
    pub fn rng(&self, master_seed: u64, replicate: u64, path: u64) -> ChaCha8Rng {
        let stream = seeding::child_seed(path, self.seed.unwrap_or(0));
        seeding::stream_rng(master_seed, replicate, stream)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Packet<P> {
    pub seq: u64,
    pub payload: P,
    pub send_time: f64,
    /// `None` when the channel dropped the packet.
    pub delivery_time: Option<f64>,
}

/// What happened to a packet once it left the sender.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketOutcome {
    InFlight,
    Dropped,
    Accepted,
    Discarded,
}

impl PacketOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            PacketOutcome::InFlight => "in_flight",
            PacketOutcome::Dropped => "dropped",
            PacketOutcome::Accepted => "accepted",
            PacketOutcome::Discarded => "discarded",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogEntry {
    pub seq: u64,
    pub send_time: f64,
    pub delivery_time: Option<f64>,
    pub outcome: PacketOutcome,
}

/// Per-packet record of a channel, indexed by sequence number.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChannelLog {
    pub entries: Vec<LogEntry>,
}

impl ChannelLog {
    /// CSV rows `seq,send_time,delivery_time,tso_outcome`; dropped packets
    /// carry `DROP` in the delivery column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("seq,send_time,delivery_time,tso_outcome\n");
        for e in &self.entries {
            let delivery = match e.delivery_time {
                Some(t) => t.to_string(),
                None => "DROP".to_string(),
            };
            out.push_str(&format!("{},{},{},{}\n", e.seq, e.send_time, delivery, e.outcome.as_str()));
        }
        out
    }
}

/// One network path with its in-flight set and log.
#[derive(Debug, Clone)]
pub struct Channel<P> {
    cfg: ChannelConfig,
    rng: ChaCha8Rng,
    next_seq: u64,
    in_flight: Vec<Packet<P>>,
    log: ChannelLog,
}

impl<P: Copy> Channel<P> {
    pub fn new(cfg: ChannelConfig, rng: ChaCha8Rng) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            rng,
            next_seq: 0,
            in_flight: Vec::new(),
            log: ChannelLog::default(),
        })
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.cfg
    }

    /// Stamps `payload` with the next sequence number and hands it to the
    /// network. The drop draw precedes the delay draw, and the delay is drawn
    /// even for dropped packets so the delay stream does not depend on the
    /// drop probability.
    pub fn send(&mut self, payload: P, send_time: f64) -> Packet<P> {
        let seq = self.next_seq;
        self.next_seq += 1;
        let dropped = self.rng.random::<f64>() < self.cfg.drop_prob;
        let delay = self.cfg.delay.sample(&mut self.rng);
        let delivery_time = if dropped { None } else { Some(send_time + delay) };
        let packet = Packet { seq, payload, send_time, delivery_time };
        self.log.entries.push(LogEntry {
            seq,
            send_time,
            delivery_time,
            outcome: if dropped { PacketOutcome::Dropped } else { PacketOutcome::InFlight },
        });
        if !dropped {
            self.in_flight.push(packet);
        }
        packet
    }

    /// Removes and returns every packet due by `now`, ordered by delivery
    /// time with ties broken by sequence number.
    pub fn poll(&mut self, now: f64) -> Vec<Packet<P>> {
        let limit = now + TIME_EPS;
        let mut due = Vec::new();
        self.in_flight.retain(|p| {
            if p.delivery_time.is_some_and(|t| t <= limit) {
                due.push(*p);
                false
            } else {
                true
            }
        });
        due.sort_by(|a, b| {
            a.delivery_time
                .partial_cmp(&b.delivery_time)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.seq.cmp(&b.seq))
        });
        due
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }

    /// Records the receiver's verdict on a delivered packet.
    pub fn mark(&mut self, seq: u64, accepted: bool) {
        if let Some(e) = self.log.entries.get_mut(seq as usize) {
            e.outcome = if accepted { PacketOutcome::Accepted } else { PacketOutcome::Discarded };
        }
    }

    pub fn log(&self) -> &ChannelLog {
        &self.log
    }

    pub fn into_log(self) -> ChannelLog {
        self.log
    }
}

/// Receive buffer that passes a packet only if it is newer than every packet
/// passed before it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsoBuffer<P> {
    last_seq: Option<u64>,
    held_value: P,
}

impl<P: Copy> TsoBuffer<P> {
    pub fn new(initial: P) -> Self {
        Self {
            last_seq: None,
            held_value: initial,
        }
    }

    pub fn accept(&mut self, packet: &Packet<P>) -> bool {
        if self.last_seq.is_some_and(|last| packet.seq <= last) {
            return false;
        }
        self.last_seq = Some(packet.seq);
        self.held_value = packet.payload;
        true
    }

    pub fn last_seq(&self) -> Option<u64> {
        self.last_seq
    }

    pub fn held_value(&self) -> P {
        self.held_value
    }
}

/// Channel plus receiver: a path whose output is the most recently passed
/// payload.
#[derive(Debug, Clone)]
pub struct Link<P> {
    pub channel: Channel<P>,
    buffer: TsoBuffer<P>,
    tso_enabled: bool,
}

impl<P: Copy> Link<P> {
    pub fn new(channel: Channel<P>, initial: P, tso_enabled: bool) -> Self {
        Self {
            channel,
            buffer: TsoBuffer::new(initial),
            tso_enabled,
        }
    }

    pub fn send(&mut self, payload: P, now: f64) {
        self.channel.send(payload, now);
    }

    /// Drains due packets through the receiver and returns the held value.
    /// Without time-stamp ordering every arrival overwrites the held value.
    pub fn receive(&mut self, now: f64) -> P {
        for packet in self.channel.poll(now) {
            let accepted = if self.tso_enabled {
                self.buffer.accept(&packet)
            } else {
                self.buffer.held_value = packet.payload;
                true
            };
            self.channel.mark(packet.seq, accepted);
        }
        self.buffer.held_value
    }

    pub fn held_value(&self) -> P {
        self.buffer.held_value
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayHistogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub sent: u64,
    pub delivered_count: u64,
    pub dropped_count: u64,
    pub tso_accepted_count: u64,
    pub tso_discarded_count: u64,
    pub in_flight_count: u64,
    pub drop_rate: f64,
    pub delay_histogram: DelayHistogram,
}

/// Summarizes a channel log; `bins` equal-width bins span the law's bounds
/// (a single bin for a degenerate range).
pub fn channel_stats(log: &ChannelLog, law: &DelayLaw, bins: usize) -> ChannelStats {
    let (lo, hi) = law.bounds();
    let nbins = if hi > lo { bins.max(1) } else { 1 };
    let mut counts = vec![0u64; nbins];
    let (mut dropped, mut accepted, mut discarded, mut in_flight) = (0, 0, 0, 0);
    for e in &log.entries {
        match e.outcome {
            PacketOutcome::Dropped => dropped += 1,
            PacketOutcome::Accepted => accepted += 1,
            PacketOutcome::Discarded => discarded += 1,
            PacketOutcome::InFlight => in_flight += 1,
        }
        if let Some(t) = e.delivery_time {
            let delay = t - e.send_time;
            let bin = if nbins == 1 {
                0
            } else {
                (((delay - lo) / (hi - lo) * nbins as f64).floor().max(0.0) as usize).min(nbins - 1)
            };
            counts[bin] += 1;
        }
    }
    let sent = log.entries.len() as u64;
    ChannelStats {
        sent,
        delivered_count: sent - dropped,
        dropped_count: dropped,
        tso_accepted_count: accepted,
        tso_discarded_count: discarded,
        in_flight_count: in_flight,
        drop_rate: if sent == 0 { 0.0 } else { dropped as f64 / sent as f64 },
        delay_histogram: DelayHistogram { lo, hi, counts },
    }
}

/// Sends `packets` samples at period `ts` through one path and drains it;
/// returns the log and the sequence numbers passed by the receiver, in order.
pub fn audit_channel(cfg: &ChannelConfig, packets: u64, ts: f64, seed: u64, tso_enabled: bool) -> Result<(ChannelLog, Vec<u64>)> {
    let channel = Channel::new(*cfg, cfg.rng(seed, 0, 0))?;
    let mut link = Link::new(channel, 0u64, tso_enabled);
    let mut passed = Vec::new();
    let drain = |link: &mut Link<u64>, now: f64, passed: &mut Vec<u64>| {
        for packet in link.channel.poll(now) {
            let accepted = if tso_enabled { link.buffer.accept(&packet) } else { true };
            link.channel.mark(packet.seq, accepted);
            if accepted {
                passed.push(packet.seq);
            }
        }
    };
    for k in 0..packets {
        let now = k as f64 * ts;
        link.send(k, now);
        drain(&mut link, now, &mut passed);
    }
    drain(&mut link, f64::INFINITY, &mut passed);
    Ok((link.channel.into_log(), passed))
}
