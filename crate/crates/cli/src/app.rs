use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use bridge_core::client::ChatClient;
use bridge_core::exchange::{Exchange, ExchangeSettings, Shutdown};
use bridge_core::guest::{run_console, ConsoleStyle};
use bridge_core::history::ChatHistory;
use bridge_core::share::{RealFs, ShareFs};
use bridge_core::transcript::JsonlTranscript;
use bridge_gateway::{Gateway, GatewayConfig, GatewayServer};
use bridge_mock::{load_fixture, MockMode, MockServer};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::check::{check_input, check_output};
use crate::config::{load_config, read_config_file, BridgeConfig, ConfigFlags};
use crate::priming::{example_priming, load_priming};

#[derive(Debug, Parser)]
#[command(name = "chatbridge", version, about = "Shared-folder chat bridge between a guest console and an LLM server")]
pub struct Cli {
    /// Log verbosity on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the host daemon on a share directory.
    Bridge(BridgeArgs),
    /// Run the guest console over stdin/stdout.
    Guest(GuestArgs),
    /// Run a mock OpenAI-compatible server.
    Mock(MockArgs),
    /// Validate the share directory files against the wire format.
    CheckProtocol(CheckArgs),
}

#[derive(Debug, Args)]
pub struct BridgeArgs {
    #[command(flatten)]
    pub config: ConfigFlags,
    /// Serve generation from an in-process mock instead of `--server-url`.
    #[arg(long)]
    pub mock_inline: bool,
    /// Scripted replies for the inline mock (JSON list of strings). Echo when absent.
    #[arg(long, requires = "mock_inline")]
    pub mock_fixture: Option<PathBuf>,
    /// Exit after this many turns.
    #[arg(long)]
    pub max_turns: Option<usize>,
    /// Static console UI assets served by the gateway.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GuestArgs {
    #[command(flatten)]
    pub config: ConfigFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MockKind {
    Scripted,
    Echo,
    Overlong,
    Delayed,
    Fail,
}

#[derive(Debug, Args)]
pub struct MockArgs {
    #[arg(long, default_value = "127.0.0.1:8000")]
    pub bind: String,
    #[arg(long, value_enum, default_value = "echo")]
    pub mode: MockKind,
    /// Scripted replies (JSON list of strings); required for `scripted`, optional for `delayed`.
    #[arg(long)]
    pub fixture: Option<PathBuf>,
    /// Overlong reply length as a multiple of `max_tokens`.
    #[arg(long, default_value_t = 5)]
    pub multiplier: u32,
    #[arg(long, default_value_t = 1000)]
    pub delay_ms: u64,
    /// HTTP status for `fail`.
    #[arg(long, default_value_t = 503)]
    pub status: u16,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub config: ConfigFlags,
}

pub fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        _ => tracing::Level::DEBUG,
    };
    let _ = tracing_subscriber::fmt().with_writer(std::io::stderr).with_max_level(level).try_init();
}

pub fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    init_logging(cli.verbose);
    match cli.command {
        Command::Bridge(args) => run_bridge(args),
        Command::Guest(args) => run_guest(args),
        Command::Mock(args) => run_mock(args),
        Command::CheckProtocol(args) => run_check(args),
    }
}

fn resolve(flags: &ConfigFlags) -> anyhow::Result<BridgeConfig> {
    let file = read_config_file(flags)?;
    Ok(load_config(flags, &|k| std::env::var(k).ok(), file.as_ref())?)
}

/// Triggers `shutdown` on SIGINT. The watcher thread lives until process exit.
fn watch_interrupt(shutdown: Shutdown) {
    let spawned = std::thread::Builder::new().name("signals".into()).spawn(move || {
        let rt = match tokio::runtime::Builder::new_current_thread().enable_all().build() {
            Ok(rt) => rt,
            Err(e) => {
                tracing::warn!("no signal handling: {e}");
                return;
            }
        };
        if rt.block_on(tokio::signal::ctrl_c()).is_ok() {
            tracing::info!("interrupt received, finishing");
            shutdown.trigger();
        }
    });
    if let Err(e) = spawned {
        tracing::warn!("no signal handling: {e}");
    }
}

fn run_bridge(args: BridgeArgs) -> anyhow::Result<ExitCode> {
    let mut cfg = resolve(&args.config)?;
    cfg.share.validate_dir()?;

    let _mock = if args.mock_inline {
        let mode = match &args.mock_fixture {
            Some(path) => MockMode::Scripted(load_fixture(path)?),
            None => MockMode::Echo,
        };
        let server = MockServer::start(mode, "127.0.0.1:0")?;
        cfg.gen.endpoint_url = server.url();
        tracing::info!("inline mock at {}", server.url());
        Some(server)
    } else {
        None
    };

    let priming = match &cfg.priming_path {
        Some(path) => load_priming(path)?,
        None => example_priming(),
    };
    let fs: Arc<dyn ShareFs> = Arc::new(RealFs);

    let _gateway = match cfg.gateway_port {
        Some(port) => {
            let gateway = Gateway::new(
                fs.clone(),
                GatewayConfig {
                    paths: cfg.share.clone(),
                    guest: cfg.guest.clone(),
                    max_line_bytes: cfg.chunk.max_line_bytes,
                    ui_dir: args.ui_dir.clone(),
                },
            );
            let server = GatewayServer::start(Arc::new(gateway), &format!("127.0.0.1:{port}"))
                .with_context(|| format!("cannot bind gateway port {port}"))?;
            eprintln!("gateway listening on {}", server.url());
            Some(server)
        }
        None => None,
    };

    let mut settings = ExchangeSettings::new(cfg.share.clone());
    settings.poll = cfg.poll;
    settings.chunk = cfg.chunk.clone();
    settings.failure_line = cfg.failure_line.clone();
    let history = ChatHistory::new(priming, cfg.history_window);
    let mut exchange = Exchange::new(fs, settings, ChatClient::new(cfg.gen.clone()), history);

    let mut sink = JsonlTranscript::open(&cfg.transcript_path)
        .with_context(|| format!("cannot open transcript {}", cfg.transcript_path.display()))?;
    let shutdown = Shutdown::new();
    watch_interrupt(shutdown.clone());

    tracing::info!("bridging {} via {}", cfg.share.dir.display(), cfg.gen.endpoint_url);
    let turns = exchange.run_loop(&mut sink, &shutdown, args.max_turns)?;
    tracing::info!("{turns} turns");
    Ok(ExitCode::SUCCESS)
}

fn run_guest(args: GuestArgs) -> anyhow::Result<ExitCode> {
    let cfg = resolve(&args.config)?;
    cfg.share.validate_dir()?;
    let stdin = std::io::stdin();
    let style = ConsoleStyle { echo_input: !stdin.is_terminal(), ..ConsoleStyle::default() };
    let summary = run_console(&RealFs, &cfg.share, &cfg.guest, &style, stdin.lock(), std::io::stdout().lock())?;
    tracing::info!("{} turns, {} dozes", summary.turns, summary.dozes);
    Ok(ExitCode::SUCCESS)
}

fn run_mock(args: MockArgs) -> anyhow::Result<ExitCode> {
    let scripted = |required: bool| -> anyhow::Result<Option<MockMode>> {
        match &args.fixture {
            Some(path) => Ok(Some(MockMode::Scripted(load_fixture(path)?))),
            None if required => bail!("--mode scripted needs --fixture"),
            None => Ok(None),
        }
    };
    let mode = match args.mode {
        MockKind::Scripted => scripted(true)?.expect("fixture checked"),
        MockKind::Echo => MockMode::Echo,
        MockKind::Overlong => MockMode::Overlong(args.multiplier),
        MockKind::Delayed => {
            MockMode::delayed(Duration::from_millis(args.delay_ms), scripted(false)?.unwrap_or(MockMode::Echo))
        }
        MockKind::Fail => MockMode::Fail(args.status),
    };
    let server = MockServer::start(mode, &args.bind)?;
    eprintln!("mock server at {}", server.url());
    server.wait();
    Ok(ExitCode::SUCCESS)
}

fn run_check(args: CheckArgs) -> anyhow::Result<ExitCode> {
    let cfg = resolve(&args.config)?;
    let read = |path: PathBuf| -> anyhow::Result<Vec<u8>> {
        match std::fs::read(&path) {
            Ok(b) => Ok(b),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
            Err(e) => Err(e).with_context(|| format!("cannot read {}", path.display())),
        }
    };
    let input = cfg.share.input();
    let output = cfg.share.output();
    let mut ok = true;
    for (path, violations) in [
        (&input, check_input(&read(input.clone())?)),
        (&output, check_output(&read(output.clone())?, cfg.chunk.max_line_bytes)),
    ] {
        if violations.is_empty() {
            println!("ok {}", path.display());
        }
        for v in violations {
            ok = false;
            println!("invalid {}: {v}", path.display());
        }
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
