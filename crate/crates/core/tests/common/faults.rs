//! Scripted guest/host session over the fault-injecting share.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use bridge_core::faultfs::{FaultConfig, FaultFs, Side};
use bridge_core::guest::{poll_reply, send_input, GuestPolicy, GuestReply, InputMode};
use bridge_core::transcript::MemoryTranscript;
use bridge_core::{ChatClient, ChatHistory, Exchange, ExchangeSettings, GenerationConfig, PollPolicy, SharePaths, Shutdown};
use bridge_mock::{MockMode, MockServer};

#[derive(Debug, Default)]
pub struct FaultReport {
    pub turns: usize,
    pub replies_matching: usize,
    pub dozes: usize,
    pub wrong_replies: Vec<(String, GuestReply)>,
    pub host_turns: usize,
    pub host_inputs_in_order: bool,
    pub input_left_nonempty: usize,
    pub torn_reads: usize,
    pub elapsed: Duration,
}

impl FaultReport {
    pub fn exactly_once(&self) -> bool {
        self.replies_matching == self.turns
            && self.dozes == 0
            && self.wrong_replies.is_empty()
            && self.host_turns == self.turns
            && self.host_inputs_in_order
            && self.input_left_nonempty == 0
    }
}

/// Runs `turns` echo turns. The share delays cross-side visibility by up to
/// `5 * poll` and tears first reads with probability `torn`.
pub fn run_session(turns: usize, poll: Duration, torn: f64, seed: u64) -> FaultReport {
    let start = Instant::now();
    let fault = FaultFs::new(FaultConfig { max_delay: poll * 5, torn_read_probability: torn, seed });
    let paths = SharePaths::new(PathBuf::from("/share"));
    let mock = MockServer::start(MockMode::Echo, "127.0.0.1:0").unwrap();

    let mut settings = ExchangeSettings::new(paths.clone());
    settings.poll = PollPolicy { interval: poll, stability_reads: 2 };
    let gen = GenerationConfig { endpoint_url: mock.url(), request_timeout: Duration::from_secs(5), ..GenerationConfig::default() };
    let mut exchange = Exchange::new(Arc::new(fault.view(Side::Host)), settings, ChatClient::new(gen), ChatHistory::new(vec![], 10));

    let shutdown = Shutdown::new();
    let host_shutdown = shutdown.clone();
    let host = std::thread::spawn(move || {
        let mut sink = MemoryTranscript::default();
        exchange.run_loop(&mut sink, &host_shutdown, Some(turns)).unwrap();
        sink.records
    });

    let guest_fs = fault.view(Side::Guest);
    let policy = GuestPolicy { attempt_interval: poll * 4, max_read_attempts: 10, ..GuestPolicy::default() };
    let mut report = FaultReport { turns, ..FaultReport::default() };
    for i in 0..turns {
        let text = format!("turn {i} ping");
        send_input(&guest_fs, &paths, &text, &policy, InputMode::Programmatic).unwrap();
        let outcome = poll_reply(&guest_fs, &paths, &policy).unwrap();
        match outcome.reply {
            GuestReply::Lines(ref l) if l.len() == 1 && l[0] == text => report.replies_matching += 1,
            GuestReply::Dozed => report.dozes += 1,
            other => report.wrong_replies.push((text, other)),
        }
        if !fault.peek(Side::Host, &paths.input()).is_empty() {
            report.input_left_nonempty += 1;
        }
    }
    shutdown.trigger();
    let records = host.join().unwrap();
    report.host_turns = records.len();
    report.host_inputs_in_order = records.iter().enumerate().all(|(i, r)| r.user_text == format!("turn {i} ping"));
    report.torn_reads = fault.torn_reads();
    report.elapsed = start.elapsed();
    report
}
