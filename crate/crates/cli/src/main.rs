mod client;
mod render;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;
use std::thread;
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use client::{describe_error, Client, Reply};

const POLL_INTERVAL: Duration = Duration::from_millis(200);
const POLL_TIMEOUT: Duration = Duration::from_secs(10);

/// Operator client for the orchestrator API.
#[derive(Debug, Parser)]
#[command(name = "inflight", version)]
struct Cli {
    /// Service base address.
    #[arg(long, global = true, env = "INFLIGHT_ENDPOINT", default_value = "http://127.0.0.1:8080")]
    endpoint: String,
    /// Print the raw API document instead of a table.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Submit an intent request file and wait for INSTALLED or FAILED.
    Submit { file: PathBuf },
    /// List intents, or show one with its state history.
    Status { id: Option<String> },
    Withdraw { id: String },
    /// Rank the candidate solutions for a request file without submitting it.
    Explain { file: PathBuf },
    Topology,
    Trace { src: String, dst: String },
    /// Take a link down.
    Fail { link_id: String },
    /// Bring a link back up.
    Restore { link_id: String },
}

/// Error with the exit code it maps to: 2 usage or bad input, 3 transport,
/// 4 reported by the server (including a FAILED intent).
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn transport(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }

    pub fn server(message: impl Into<String>) -> Self {
        Self {
            code: 4,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

struct Output {
    json: bool,
}

impl Output {
    /// Raw body in structured mode, rendered view otherwise.
    fn show(&self, reply: &Reply, view: impl FnOnce(&Value) -> String) -> Result<(), Failure> {
        if self.json {
            println!("{}", reply.text);
        } else {
            print!("{}", view(&reply.json()?));
        }
        Ok(())
    }
}

fn read_request(file: &PathBuf) -> Result<Value, Failure> {
    let text = std::fs::read_to_string(file).map_err(|e| Failure::usage(format!("{}: {e}", file.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: malformed JSON: {e}", file.display())))
}

fn is_terminal(state: &str) -> bool {
    matches!(state, "INSTALLED" | "FAILED" | "WITHDRAWN")
}

fn submit(client: &Client, out: &Output, file: &PathBuf) -> Result<(), Failure> {
    let request = read_request(file)?;
    let reply = client.post("/intents", &request)?;
    if reply.status == 400 {
        let detail = reply.json().ok().and_then(|v| describe_error(&v)).unwrap_or(reply.text);
        return Err(Failure::usage(format!("{}: {detail}", file.display())));
    }
    let created = reply.checked()?.json()?;
    let id = created["id"].as_str().ok_or_else(|| Failure::server("response has no intent id"))?;
    let path = format!("/intents/{id}");
    let started = Instant::now();
    let mut current = client.get(&path)?.checked()?;
    loop {
        let state = current.json()?["state"].as_str().unwrap_or_default().to_string();
        if is_terminal(&state) {
            break;
        }
        if started.elapsed() >= POLL_TIMEOUT {
            return Err(Failure::server(format!("{id}: still {state} after {}s", POLL_TIMEOUT.as_secs())));
        }
        thread::sleep(POLL_INTERVAL);
        current = client.get(&path)?.checked()?;
    }
    let intent = current.json()?;
    if out.json {
        println!("{}", current.text);
    } else {
        let state = intent["state"].as_str().unwrap_or_default();
        match intent["state"].as_str() {
            Some("INSTALLED") => println!("{id} {state}"),
            _ => {
                let reason = intent["stateHistory"]
                    .as_array()
                    .and_then(|h| h.last())
                    .and_then(|c| c["reason"].as_str())
                    .unwrap_or("");
                println!("{id} {state}: {reason}");
            }
        }
    }
    match intent["state"].as_str() {
        Some("INSTALLED") => Ok(()),
        Some(other) => Err(Failure::server(format!("{id} ended {other}"))),
        None => Err(Failure::server(format!("{id}: response has no state"))),
    }
}

fn link_event(client: &Client, out: &Output, kind: &str, link: &str) -> Result<(), Failure> {
    let reply = client
        .post("/topology/events", &json!({"kind": kind, "linkId": link}))?
        .checked()?;
    out.show(&reply, render::event_results)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let client = Client::new(&cli.endpoint);
    let out = Output { json: cli.json };
    match &cli.command {
        Command::Submit { file } => submit(&client, &out, file),
        Command::Status { id: None } => out.show(&client.get("/intents")?.checked()?, render::intents),
        Command::Status { id: Some(id) } => {
            out.show(&client.get(&format!("/intents/{id}"))?.checked()?, render::intent)
        }
        Command::Withdraw { id } => out.show(&client.delete(&format!("/intents/{id}"))?.checked()?, |v| {
            format!("{} {}\n", v["id"].as_str().unwrap_or(id), v["state"].as_str().unwrap_or("?"))
        }),
        Command::Explain { file } => {
            let request = read_request(file)?;
            out.show(&client.post("/explain", &request)?.checked()?, render::explain)
        }
        Command::Topology => out.show(&client.get("/topology")?.checked()?, render::topology),
        Command::Trace { src, dst } => {
            let reply = client.get_query("/trace", &[("src", src), ("dst", dst)])?;
            out.show(&reply.checked()?, render::trace)
        }
        Command::Fail { link_id } => link_event(&client, &out, "LINK_DOWN", link_id),
        Command::Restore { link_id } => link_event(&client, &out, "LINK_UP", link_id),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
