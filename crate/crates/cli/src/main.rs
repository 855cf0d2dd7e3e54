use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use metacp_cli::commands::{cmd_compile, cmd_fmt, cmd_validate};
use metacp_cli::server::{router, AppState};
use metacp_core::pipeline::ExitStatus;
use metacp_core::store::ProtocolStore;

/// Validate, format and compile PSV protocol specifications.
#[derive(Debug, Parser)]
#[command(name = "metacp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Schema, executability and goal checks.
    Validate {
        path: PathBuf,
        /// Print `{ok, diagnostics}` JSON on standard output.
        #[arg(long)]
        json: bool,
    },
    /// Compile with a backend plugin.
    Compile {
        path: PathBuf,
        #[arg(long, default_value = "tamarin")]
        backend: String,
        /// Output file, `-` for standard output. Defaults to the input name
        /// with the backend's extension.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Rewrite a file in canonical form.
    Fmt {
        path: PathBuf,
        /// Only report whether the file is canonical.
        #[arg(long)]
        check: bool,
    },
    /// Serve the HTTP API (and designer assets, when given).
    Serve {
        /// Protocol store directory; METACP_STORE takes precedence.
        #[arg(long, default_value = "protocols")]
        root: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
        host: IpAddr,
        /// Directory of static designer assets.
        #[arg(long)]
        assets: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let status = if e.use_stderr() { ExitStatus::Usage } else { ExitStatus::Success };
            return ExitCode::from(status.code());
        }
    };
    let (mut out, mut err) = (std::io::stdout(), std::io::stderr());
    let status = match cli.command {
        Command::Validate { path, json } => cmd_validate(&path, json, &mut out, &mut err),
        Command::Compile { path, backend, out: target } => {
            cmd_compile(&path, &backend, target.as_deref(), &mut out, &mut err)
        }
        Command::Fmt { path, check } => cmd_fmt(&path, check, &mut err),
        Command::Serve {
            root,
            port,
            host,
            assets,
        } => serve(root, SocketAddr::new(host, port), assets),
    };
    ExitCode::from(status.code())
}

fn serve(root: PathBuf, addr: SocketAddr, assets: Option<PathBuf>) -> ExitStatus {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let root = std::env::var_os("METACP_STORE").map(PathBuf::from).unwrap_or(root);
    let store = match ProtocolStore::open(&root) {
        Ok(s) => Arc::new(s),
        Err(e) => {
            eprintln!("{}: cannot open store: {e}", root.display());
            return ExitStatus::Io;
        }
    };
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("cannot start runtime: {e}");
            return ExitStatus::Io;
        }
    };
    runtime.block_on(async move {
        let listener = match tokio::net::TcpListener::bind(addr).await {
            Ok(l) => l,
            Err(e) => {
                eprintln!("cannot bind {addr}: {e}");
                return ExitStatus::Io;
            }
        };
        match listener.local_addr() {
            Ok(bound) => println!("listening on http://{bound}"),
            Err(e) => {
                eprintln!("cannot read bound address: {e}");
                return ExitStatus::Io;
            }
        }
        let app = router(AppState { store }, assets);
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        match axum::serve(listener, app).with_graceful_shutdown(shutdown).await {
            Ok(()) => ExitStatus::Success,
            Err(e) => {
                eprintln!("server error: {e}");
                ExitStatus::Io
            }
        }
    })
}
