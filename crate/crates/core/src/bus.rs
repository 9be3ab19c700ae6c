//! In-process topic broker with service classes and a simulated clock.
//!
//! Topics are `/`-separated segments. Patterns may use `+` for exactly one
//! segment and a trailing `#` for any remainder. Every published envelope gets
//! one delivery deadline drawn uniformly from `[1, max_latency]` of its
//! service class; all matching subscribers receive it at that deadline.
//! Deliveries for a `(sender, topic)` pair never overtake each other: a newer
//! envelope with an earlier deadline pulls the pending older ones forward.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex, MutexGuard};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::message::Payload;

/// Simulated milliseconds.
pub type Millis = u64;

pub const DEFAULT_TICK_MS: Millis = 10;
pub const DEFAULT_CRITICAL_LATENCY_MS: Millis = 50;
pub const DEFAULT_STANDARD_LATENCY_MS: Millis = 250;
pub const DEFAULT_PAYLOAD_CAP: usize = 64 * 1024;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BusError {
    #[error("invalid topic `{0}`")]
    InvalidTopic(String),
    #[error("invalid topic pattern `{0}`")]
    InvalidPattern(String),
    #[error("service class `{0:?}` is not registered")]
    UnknownServiceClass(QosClass),
    #[error("payload of {size} bytes exceeds cap of {cap} bytes")]
    PayloadTooLarge { size: usize, cap: usize },
    #[error("sender `{sender}` seq {seq} does not follow {last}")]
    SeqRegression { sender: String, seq: u64, last: u64 },
    #[error("sender `{sender}` sent_at {sent_at} precedes {last}")]
    TimeRegression {
        sender: String,
        sent_at: Millis,
        last: Millis,
    },
    #[error("sent_at {sent_at} is ahead of the clock ({now})")]
    FromTheFuture { sent_at: Millis, now: Millis },
    #[error("operation requires {expected:?} clock mode")]
    WrongClockMode { expected: ClockMode },
    #[error("service class bounds invalid: {0}")]
    InvalidServiceClasses(String),
    #[error("payload could not be serialized: {0}")]
    Serialization(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QosClass {
    Critical,
    Standard,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceClass {
    pub name: QosClass,
    pub max_latency: Millis,
}

/// The registered service classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceClasses {
    classes: BTreeMap<QosClass, Millis>,
}

impl ServiceClasses {
    pub fn new(classes: impl IntoIterator<Item = ServiceClass>) -> Result<Self, BusError> {
        let classes: BTreeMap<_, _> = classes
            .into_iter()
            .map(|c| (c.name, c.max_latency))
            .collect();
        if classes.values().any(|&l| l == 0) {
            return Err(BusError::InvalidServiceClasses(
                "max_latency must be > 0".into(),
            ));
        }
        if let (Some(c), Some(s)) = (
            classes.get(&QosClass::Critical),
            classes.get(&QosClass::Standard),
        ) {
            if c >= s {
                return Err(BusError::InvalidServiceClasses(format!(
                    "critical ({c} ms) must be faster than standard ({s} ms)"
                )));
            }
        }
        Ok(ServiceClasses { classes })
    }

    pub fn get(&self, qos: QosClass) -> Option<ServiceClass> {
        self.classes.get(&qos).map(|&max_latency| ServiceClass {
            name: qos,
            max_latency,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = ServiceClass> + '_ {
        self.classes
            .iter()
            .map(|(&name, &max_latency)| ServiceClass { name, max_latency })
    }
}

impl Default for ServiceClasses {
    fn default() -> Self {
        ServiceClasses::new([
            ServiceClass {
                name: QosClass::Critical,
                max_latency: DEFAULT_CRITICAL_LATENCY_MS,
            },
            ServiceClass {
                name: QosClass::Standard,
                max_latency: DEFAULT_STANDARD_LATENCY_MS,
            },
        ])
        .expect("default classes are valid")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    Lockstep,
    Realtime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clock {
    pub mode: ClockMode,
    now: Millis,
    pub tick: Millis,
}

impl Clock {
    pub fn new(mode: ClockMode, tick: Millis) -> Self {
        assert!(tick > 0, "tick must be positive");
        Clock { mode, now: 0, tick }
    }

    pub fn lockstep() -> Self {
        Clock::new(ClockMode::Lockstep, DEFAULT_TICK_MS)
    }

    pub fn now(&self) -> Millis {
        self.now
    }

    fn advance(&mut self, steps: u64) -> Result<Millis, BusError> {
        if self.mode != ClockMode::Lockstep {
            return Err(BusError::WrongClockMode {
                expected: ClockMode::Lockstep,
            });
        }
        self.now += steps * self.tick;
        Ok(self.now)
    }

    /// Moves a realtime clock forward to `now`. Never moves backwards.
    fn sync(&mut self, now: Millis) -> Result<Millis, BusError> {
        if self.mode != ClockMode::Realtime {
            return Err(BusError::WrongClockMode {
                expected: ClockMode::Realtime,
            });
        }
        self.now = self.now.max(now);
        Ok(self.now)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope<P = Payload> {
    pub topic: String,
    pub sender: String,
    pub seq: u64,
    pub sent_at: Millis,
    pub qos: QosClass,
    pub payload: P,
}

pub fn validate_topic(topic: &str) -> Result<(), BusError> {
    let bad = topic.is_empty()
        || topic
            .split('/')
            .any(|s| s.is_empty() || s.contains('+') || s.contains('#'));
    if bad {
        Err(BusError::InvalidTopic(topic.to_string()))
    } else {
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Segment {
    Literal(String),
    Single,
    Rest,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TopicPattern {
    raw: String,
    segments: Vec<Segment>,
}

impl TopicPattern {
    pub fn parse(raw: &str) -> Result<Self, BusError> {
        let err = || BusError::InvalidPattern(raw.to_string());
        if raw.is_empty() {
            return Err(err());
        }
        let parts: Vec<&str> = raw.split('/').collect();
        let mut segments = Vec::with_capacity(parts.len());
        for (i, part) in parts.iter().enumerate() {
            let seg = match *part {
                "+" => Segment::Single,
                "#" if i + 1 == parts.len() => Segment::Rest,
                p if p.is_empty() || p.contains('+') || p.contains('#') => return Err(err()),
                p => Segment::Literal(p.to_string()),
            };
            segments.push(seg);
        }
        Ok(TopicPattern {
            raw: raw.to_string(),
            segments,
        })
    }

    pub fn as_str(&self) -> &str {
        &self.raw
    }

    pub fn matches(&self, topic: &str) -> bool {
        let mut levels = topic.split('/');
        for seg in &self.segments {
            match seg {
                Segment::Rest => return true,
                Segment::Single => {
                    if levels.next().is_none() {
                        return false;
                    }
                }
                Segment::Literal(lit) => {
                    if levels.next() != Some(lit.as_str()) {
                        return false;
                    }
                }
            }
        }
        levels.next().is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubscriptionHandle {
    pub subscriber: String,
    pub pattern: String,
}

/// Returned by `publish`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Receipt {
    pub deadline: Millis,
    pub subscribers: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Delivery<P = Payload> {
    pub at: Millis,
    pub envelope: Arc<Envelope<P>>,
    pub subscriber: String,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct QueueKey {
    deadline: Millis,
    sender: String,
    seq: u64,
}

struct Pending<P> {
    envelope: Arc<Envelope<P>>,
    subscribers: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct BusConfig {
    pub classes: ServiceClasses,
    pub clock: Clock,
    pub payload_cap: usize,
    pub seed: u64,
}

impl Default for BusConfig {
    fn default() -> Self {
        BusConfig {
            classes: ServiceClasses::default(),
            clock: Clock::lockstep(),
            payload_cap: DEFAULT_PAYLOAD_CAP,
            seed: 0,
        }
    }
}

pub struct Bus<P = Payload> {
    clock: Clock,
    classes: ServiceClasses,
    payload_cap: usize,
    rng: ChaCha8Rng,
    subscriptions: BTreeMap<String, BTreeSet<TopicPattern>>,
    queue: BTreeMap<QueueKey, Pending<P>>,
    // pending deadlines per (sender, topic), keyed by seq
    in_flight: HashMap<(String, String), BTreeMap<u64, Millis>>,
    last_sent: HashMap<String, (u64, Millis)>,
}

impl<P: Serialize> Bus<P> {
    pub fn new(config: BusConfig) -> Self {
        Bus {
            clock: config.clock,
            classes: config.classes,
            payload_cap: config.payload_cap,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            subscriptions: BTreeMap::new(),
            queue: BTreeMap::new(),
            in_flight: HashMap::new(),
            last_sent: HashMap::new(),
        }
    }

    pub fn clock(&self) -> &Clock {
        &self.clock
    }

    pub fn now(&self) -> Millis {
        self.clock.now
    }

    pub fn classes(&self) -> &ServiceClasses {
        &self.classes
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Next seq a sender should use.
    pub fn next_seq(&self, sender: &str) -> u64 {
        self.last_sent.get(sender).map_or(1, |(seq, _)| seq + 1)
    }

    /// Builds an envelope stamped with the sender's next seq and the current time.
    pub fn envelope(
        &self,
        sender: &str,
        topic: impl Into<String>,
        qos: QosClass,
        payload: P,
    ) -> Envelope<P> {
        Envelope {
            topic: topic.into(),
            sender: sender.to_string(),
            seq: self.next_seq(sender),
            sent_at: self.clock.now,
            qos,
            payload,
        }
    }

    /// Stamps and publishes in one call.
    pub fn send(
        &mut self,
        sender: &str,
        topic: impl Into<String>,
        qos: QosClass,
        payload: P,
    ) -> Result<Receipt, BusError> {
        let env = self.envelope(sender, topic, qos, payload);
        self.publish(env)
    }

    pub fn subscribe(
        &mut self,
        pattern: &str,
        subscriber: &str,
    ) -> Result<SubscriptionHandle, BusError> {
        let parsed = TopicPattern::parse(pattern)?;
        self.subscriptions
            .entry(subscriber.to_string())
            .or_default()
            .insert(parsed);
        Ok(SubscriptionHandle {
            subscriber: subscriber.to_string(),
            pattern: pattern.to_string(),
        })
    }

    /// Returns whether the subscription existed.
    pub fn unsubscribe(&mut self, handle: &SubscriptionHandle) -> bool {
        let Some(set) = self.subscriptions.get_mut(&handle.subscriber) else {
            return false;
        };
        let before = set.len();
        set.retain(|p| p.as_str() != handle.pattern);
        let removed = set.len() != before;
        if set.is_empty() {
            self.subscriptions.remove(&handle.subscriber);
        }
        removed
    }

    pub fn publish(&mut self, env: Envelope<P>) -> Result<Receipt, BusError> {
        validate_topic(&env.topic)?;
        let class = self
            .classes
            .get(env.qos)
            .ok_or(BusError::UnknownServiceClass(env.qos))?;
        let size = serde_json::to_vec(&env.payload)
            .map_err(|e| BusError::Serialization(e.to_string()))?
            .len();
        if size > self.payload_cap {
            return Err(BusError::PayloadTooLarge {
                size,
                cap: self.payload_cap,
            });
        }
        if env.sent_at > self.clock.now {
            return Err(BusError::FromTheFuture {
                sent_at: env.sent_at,
                now: self.clock.now,
            });
        }
        if let Some(&(last_seq, last_at)) = self.last_sent.get(&env.sender) {
            if env.seq <= last_seq {
                return Err(BusError::SeqRegression {
                    sender: env.sender,
                    seq: env.seq,
                    last: last_seq,
                });
            }
            if env.sent_at < last_at {
                return Err(BusError::TimeRegression {
                    sender: env.sender,
                    sent_at: env.sent_at,
                    last: last_at,
                });
            }
        }
        self.last_sent
            .insert(env.sender.clone(), (env.seq, env.sent_at));

        // Lower bound keeps deliveries strictly after the current instant.
        let earliest = (self.clock.now + 1).max(env.sent_at + 1);
        let latest = env.sent_at + class.max_latency;
        let drawn = env.sent_at + self.rng.gen_range(1..=class.max_latency);
        let deadline = drawn.clamp(earliest.min(latest), latest);

        let flow = (env.sender.clone(), env.topic.clone());
        let earlier: Vec<(u64, Millis)> = self
            .in_flight
            .get(&flow)
            .map(|m| {
                m.iter()
                    .filter(|(_, &d)| d > deadline)
                    .map(|(&s, &d)| (s, d))
                    .collect()
            })
            .unwrap_or_default();
        for (seq, old) in earlier {
            let old_key = QueueKey {
                deadline: old,
                sender: env.sender.clone(),
                seq,
            };
            if let Some(p) = self.queue.remove(&old_key) {
                self.queue.insert(
                    QueueKey {
                        deadline,
                        ..old_key
                    },
                    p,
                );
            }
            self.in_flight
                .get_mut(&flow)
                .expect("flow present")
                .insert(seq, deadline);
        }

        let subscribers: Vec<String> = self
            .subscriptions
            .iter()
            .filter(|(_, pats)| pats.iter().any(|p| p.matches(&env.topic)))
            .map(|(s, _)| s.clone())
            .collect();
        let receipt = Receipt {
            deadline,
            subscribers: subscribers.len(),
        };
        self.in_flight
            .entry(flow)
            .or_default()
            .insert(env.seq, deadline);
        let key = QueueKey {
            deadline,
            sender: env.sender.clone(),
            seq: env.seq,
        };
        self.queue.insert(
            key,
            Pending {
                envelope: Arc::new(env),
                subscribers,
            },
        );
        Ok(receipt)
    }

    /// Advances a lockstep clock by `steps` ticks and delivers everything due,
    /// ordered by (delivery time, sender, seq, subscriber).
    pub fn advance(&mut self, steps: u64) -> Result<Vec<Delivery<P>>, BusError> {
        let mut out = Vec::new();
        for _ in 0..steps {
            let now = self.clock.advance(1)?;
            self.drain_due(now, &mut out);
        }
        if steps == 0 && self.clock.mode != ClockMode::Lockstep {
            return Err(BusError::WrongClockMode {
                expected: ClockMode::Lockstep,
            });
        }
        Ok(out)
    }

    /// Realtime counterpart of `advance`: moves the clock to `now` and delivers what is due.
    pub fn sync_to(&mut self, now: Millis) -> Result<Vec<Delivery<P>>, BusError> {
        let now = self.clock.sync(now)?;
        let mut out = Vec::new();
        self.drain_due(now, &mut out);
        Ok(out)
    }

    fn drain_due(&mut self, now: Millis, out: &mut Vec<Delivery<P>>) {
        while let Some(entry) = self.queue.first_entry() {
            if entry.key().deadline > now {
                break;
            }
            let (key, pending) = entry.remove_entry();
            let flow = (
                pending.envelope.sender.clone(),
                pending.envelope.topic.clone(),
            );
            if let Some(m) = self.in_flight.get_mut(&flow) {
                m.remove(&key.seq);
                if m.is_empty() {
                    self.in_flight.remove(&flow);
                }
            }
            for subscriber in pending.subscribers {
                out.push(Delivery {
                    at: key.deadline,
                    envelope: Arc::clone(&pending.envelope),
                    subscriber,
                });
            }
        }
    }
}

/// Thread-safe handle used in realtime mode. All operations are linearized by one lock.
pub struct SharedBus<P = Payload>(Arc<Mutex<Bus<P>>>);

impl<P> Clone for SharedBus<P> {
    fn clone(&self) -> Self {
        SharedBus(Arc::clone(&self.0))
    }
}

impl<P: Serialize> SharedBus<P> {
    pub fn new(bus: Bus<P>) -> Self {
        SharedBus(Arc::new(Mutex::new(bus)))
    }

    pub fn lock(&self) -> MutexGuard<'_, Bus<P>> {
        self.0.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn send(
        &self,
        sender: &str,
        topic: impl Into<String>,
        qos: QosClass,
        payload: P,
    ) -> Result<Receipt, BusError> {
        self.lock().send(sender, topic, qos, payload)
    }

    pub fn subscribe(
        &self,
        pattern: &str,
        subscriber: &str,
    ) -> Result<SubscriptionHandle, BusError> {
        self.lock().subscribe(pattern, subscriber)
    }

    pub fn sync_to(&self, now: Millis) -> Result<Vec<Delivery<P>>, BusError> {
        self.lock().sync_to(now)
    }
}
