//! Command-line entry points. Exit status: 0 success, 1 usage error,
//! 2 processing error.

use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use vocalize_core::analytics::{engagement_report, ConcentrationCurve};
use vocalize_core::audio::ENVELOPE_BINS;
use vocalize_core::campaign::{parse_log, score_once, Campaign, CampaignState};
use vocalize_core::contour::{contour_from_silhouette, GrayscaleImage, DEFAULT_THRESHOLD};
use vocalize_core::fixtures::write_fixtures;
use vocalize_core::scoring::{FixedTranscriber, FixtureTranscriber, TranscriptionProvider};

use crate::app::{router, AppState};
use crate::config::ServiceConfig;

#[derive(Debug, Parser)]
#[command(name = "vocalize", version, about = "Gamified voice competitions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        listen: Option<SocketAddr>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Score one recording against a campaign and print the result JSON.
    Score {
        #[arg(long)]
        campaign: PathBuf,
        #[arg(long)]
        audio: PathBuf,
        /// Use this transcript instead of a transcription provider.
        #[arg(long, conflicts_with = "transcripts")]
        transcript: Option<String>,
        /// JSON map from WAV SHA-256 to transcript.
        #[arg(long)]
        transcripts: Option<PathBuf>,
    },
    /// Extract the target contour from a PGM silhouette.
    Contour {
        #[arg(long)]
        image: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: u8,
        #[arg(long, default_value = "")]
        label: String,
    },
    /// Recompute engagement reports from an event log.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
        format: ReportFormat,
        /// Also write the concentration curve as CSV.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Regenerate the golden fixtures.
    Fixtures {
        #[arg(long, default_value = "fixtures")]
        out: PathBuf,
    },
}

type Failure = String;

fn read(path: &PathBuf) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run(args: impl IntoIterator<Item = OsString>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(message) => {
            let _ = writeln!(err, "error: {message}");
            2
        }
    }
}

fn execute(command: Command, out: &mut dyn Write) -> Result<(), Failure> {
    let mut emit = |text: String| writeln!(out, "{text}").map_err(|e| e.to_string());
    match command {
        Command::Serve { config, listen, data_dir } => {
            let mut cfg = ServiceConfig::load(config.as_deref()).map_err(|e| e.to_string())?;
            if let Some(listen) = listen {
                cfg.listen = listen;
            }
            if let Some(dir) = data_dir {
                cfg.data_dir = dir;
            }
            serve(cfg)
        }
        Command::Score { campaign, audio, transcript, transcripts } => {
            let campaign = Campaign::from_json(&read(&campaign)?).map_err(|e| e.to_string())?;
            let wav = read(&audio)?;
            let transcriber: Box<dyn TranscriptionProvider> = match (transcript, transcripts) {
                (Some(t), _) => Box::new(FixedTranscriber(t)),
                (None, Some(path)) => Box::new(
                    FixtureTranscriber::from_json(&read(&path)?)
                        .map_err(|e| format!("{}: {e}", path.display()))?,
                ),
                (None, None) => Box::new(FixtureTranscriber::new()),
            };
            let result = score_once(&campaign, &wav, transcriber.as_ref()).map_err(|e| e.to_string())?;
            emit(serde_json::to_string(&result).expect("result serializes"))
        }
        Command::Contour { image, threshold, label } => {
            let img = GrayscaleImage::from_pgm(&read(&image)?).map_err(|e| e.to_string())?;
            let contour = contour_from_silhouette(&img, ENVELOPE_BINS, threshold)
                .map_err(|e| e.to_string())?
                .with_label(label);
            emit(contour.to_json())
        }
        Command::Replay { log, format, curve } => {
            let text = String::from_utf8(read(&log)?).map_err(|e| e.to_string())?;
            let events = parse_log(&text).map_err(|e| e.to_string())?;
            CampaignState::replay(&events).map_err(|e| format!("corrupt event log: {e}"))?;
            let report = engagement_report(&events).map_err(|e| e.to_string())?;
            if let Some(path) = curve {
                let curve = ConcentrationCurve::from_log(&events).map_err(|e| e.to_string())?;
                std::fs::write(&path, curve.to_csv()).map_err(|e| format!("{}: {e}", path.display()))?;
            }
            match format {
                ReportFormat::Json => emit(serde_json::to_string_pretty(&report).expect("report serializes")),
                ReportFormat::Csv => emit(report.to_csv().trim_end().to_string()),
            }
        }
        Command::Fixtures { out: dir } => {
            let written = write_fixtures(&dir).map_err(|e| e.to_string())?;
            for path in written {
                emit(path.display().to_string())?;
            }
            Ok(())
        }
    }
}

fn serve(cfg: ServiceConfig) -> Result<(), Failure> {
    let listen = cfg.listen;
    // Providers hold blocking HTTP clients, so build them before the runtime.
    let state = Arc::new(AppState::from_config(cfg).map_err(|e| e.to_string())?);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?;
    let result = runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(listen).await?;
        log::info!("listening on {}", listener.local_addr()?);
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    });
    result.map_err(|e| e.to_string())
}
