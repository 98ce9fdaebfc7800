use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, Command, Stdio};

use reqwest::blocking::Client;
use reqwest::Url;
use serde_json::Value as Json;
use w5cat::store::LOG_FILE;

use crate::Outcome;

const BIN: &str = env!("CARGO_BIN_EXE_w5cat");
const ACTOR: &str = "alice";
const SALES: &str = "file:///warehouse/sales.csv";
const CUSTOMERS: &str = "s3://lake/customers.parquet";

enum Step {
    Asset(&'static str, &'static str),
    Set(&'static str, &'static str, &'static str, &'static str),
    Supersede(&'static str, &'static str, &'static str, u32, &'static str, &'static str),
    Relate(&'static str, &'static str, &'static str, &'static str, &'static str, &'static str),
    Search(&'static str, &'static str),
    GetAll(&'static str, &'static str, &'static str),
    Audit,
}

/// Steps after which the HTTP server is killed with SIGKILL and restarted.
const KILL_AFTER: [usize; 2] = [5, 9];

fn script() -> Vec<Step> {
    use Step::*;
    vec![
        Asset(SALES, "csv"),
        Asset(CUSTOMERS, "parquet"),
        Set(SALES, "who", "owner", r#""data-eng""#),
        Set(SALES, "what", "row_count", "1200"),
        Set(SALES, "when", "last_updated", r#""2024-03-01""#),
        Set(SALES, "why", "purpose", r#""quarterly revenue forecasting""#),
        Set(CUSTOMERS, "where", "location", r#"{"bucket":"lake","region":"eu-west-1"}"#),
        Set(CUSTOMERS, "what", "row_count", "300"),
        Supersede(SALES, "what", "row_count", 1, "1250", "recount after dedup"),
        Relate("what", SALES, "what", CUSTOMERS, "join_key", r#"{"column":"customer_id"}"#),
        Search("forecast", "global"),
        Search("row_count", "what"),
        GetAll(SALES, "what", "row_count"),
        Audit,
    ]
}

fn strip_timestamps(v: &mut Json) {
    match v {
        Json::Object(m) => {
            m.remove("timestamp");
            m.values_mut().for_each(strip_timestamps);
        }
        Json::Array(a) => a.iter_mut().for_each(strip_timestamps),
        _ => {}
    }
}

fn export_lines(text: &str) -> Result<Vec<Json>, String> {
    text.lines()
        .map(|l| {
            let mut v: Json = serde_json::from_str(l).map_err(|e| format!("export line {l:?}: {e}"))?;
            strip_timestamps(&mut v);
            Ok(v)
        })
        .collect()
}

fn cli(dir: &Path, args: &[&str]) -> Result<Json, String> {
    let out = Command::new(BIN)
        .env_remove("W5CAT_DATA_DIR")
        .arg("--data-dir")
        .arg(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("w5cat {args:?} exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
    }
    serde_json::from_slice(&out.stdout).map_err(|e| format!("w5cat {args:?}: bad JSON: {e}"))
}

fn run_cli(dir: &Path) -> Result<(Vec<Json>, String), String> {
    let mut answers = Vec::new();
    for step in script() {
        match step {
            Step::Asset(uri, kind) => {
                cli(dir, &["asset", "add", "--actor", ACTOR, "--uri", uri, "--kind", kind])?;
            }
            Step::Set(asset, p, key, value) => {
                cli(
                    dir,
                    &["set", "--actor", ACTOR, "--asset", asset, "--partition", p, "--key", key, "--value", value],
                )?;
            }
            Step::Supersede(asset, p, key, version, value, reason) => {
                let v = version.to_string();
                cli(
                    dir,
                    &[
                        "supersede",
                        "--actor",
                        ACTOR,
                        "--asset",
                        asset,
                        "--partition",
                        p,
                        "--key",
                        key,
                        "--version",
                        &v,
                        "--value",
                        value,
                        "--reason",
                        reason,
                    ],
                )?;
            }
            Step::Relate(pa, a, pb, b, key, value) => {
                let (ea, eb) = (format!("{pa}@{a}"), format!("{pb}@{b}"));
                cli(
                    dir,
                    &["relate", "--actor", ACTOR, "--endpoint", &ea, "--endpoint", &eb, "--key", key, "--value", value],
                )?;
            }
            Step::Search(q, scope) => answers.push(cli(dir, &["search", "--actor", ACTOR, q, "--scope", scope])?),
            Step::GetAll(asset, p, key) => answers.push(cli(
                dir,
                &["get", "--actor", ACTOR, "--asset", asset, "--partition", p, "--key", key, "--versions", "all"],
            )?),
            Step::Audit => answers.push(cli(dir, &["audit"])?),
        }
    }
    let out = Command::new(BIN)
        .env_remove("W5CAT_DATA_DIR")
        .arg("--data-dir")
        .arg(dir)
        .arg("export")
        .output()
        .map_err(|e| e.to_string())?;
    Ok((answers, String::from_utf8_lossy(&out.stdout).into_owned()))
}

struct Server {
    child: Child,
    base: Url,
}

impl Server {
    fn start(dir: &Path) -> Result<Server, String> {
        let mut child = Command::new(BIN)
            .env_remove("W5CAT_DATA_DIR")
            .arg("--data-dir")
            .arg(dir)
            .args(["serve", "--listen", "127.0.0.1:0"])
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| e.to_string())?;
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).map_err(|e| e.to_string())?;
        let addr = line.trim().strip_prefix("listening on ").ok_or(format!("unexpected banner {line:?}"))?;
        let base = Url::parse(addr).map_err(|e| e.to_string())?;
        Ok(Server { child, base })
    }

    fn url(&self, segments: &[&str]) -> Url {
        let mut u = self.base.clone();
        u.path_segments_mut().unwrap().clear().extend(segments);
        u
    }

    fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn ok_json(resp: reqwest::Result<reqwest::blocking::Response>) -> Result<Json, String> {
    let resp = resp.map_err(|e| e.to_string())?;
    let status = resp.status();
    let body = resp.text().map_err(|e| e.to_string())?;
    if !status.is_success() {
        return Err(format!("HTTP {status}: {body}"));
    }
    serde_json::from_str(&body).map_err(|e| format!("bad JSON {body:?}: {e}"))
}

/// Leave half a frame at the end of the log, as a crash mid-append would.
fn tear_log(dir: &Path) -> Result<(), String> {
    let log = std::fs::read(dir.join(LOG_FILE)).map_err(|e| e.to_string())?;
    let frame_len = u32::from_le_bytes(log[..4].try_into().unwrap()) as usize + 8;
    let mut f = OpenOptions::new().append(true).open(dir.join(LOG_FILE)).map_err(|e| e.to_string())?;
    f.write_all(&log[..frame_len / 2]).map_err(|e| e.to_string())
}

fn run_http(dir: &Path) -> Result<(Vec<Json>, String), String> {
    let client = Client::new();
    let mut server = Server::start(dir)?;
    let mut answers = Vec::new();
    for (i, step) in script().into_iter().enumerate() {
        let s = &server;
        match step {
            Step::Asset(uri, kind) => {
                ok_json(
                    client
                        .post(s.url(&["assets"]))
                        .header("X-Actor", ACTOR)
                        .json(&serde_json::json!({"uri": uri, "kind": kind}))
                        .send(),
                )?;
            }
            Step::Set(asset, p, key, value) => {
                ok_json(
                    client
                        .put(s.url(&["assets", asset, "profiles", p, key]))
                        .header("X-Actor", ACTOR)
                        .body(value)
                        .send(),
                )?;
            }
            Step::Supersede(asset, p, key, version, value, reason) => {
                let body = serde_json::json!({
                    "version": version,
                    "value": serde_json::from_str::<Json>(value).unwrap(),
                    "reason": reason,
                });
                ok_json(
                    client
                        .post(s.url(&["assets", asset, "profiles", p, key, "supersede"]))
                        .header("X-Actor", ACTOR)
                        .json(&body)
                        .send(),
                )?;
            }
            Step::Relate(pa, a, pb, b, key, value) => {
                let body = serde_json::json!({
                    "endpoints": [{"asset": a, "partition": pa}, {"asset": b, "partition": pb}],
                    "key": key,
                    "value": serde_json::from_str::<Json>(value).unwrap(),
                });
                ok_json(client.post(s.url(&["relationships"])).header("X-Actor", ACTOR).json(&body).send())?;
            }
            Step::Search(q, scope) => {
                let mut u = s.url(&["search"]);
                u.query_pairs_mut().append_pair("q", q).append_pair("scope", scope);
                answers.push(ok_json(client.get(u).header("X-Actor", ACTOR).send())?);
            }
            Step::GetAll(asset, p, key) => {
                let mut u = s.url(&["assets", asset, "profiles", p, key]);
                u.query_pairs_mut().append_pair("versions", "all");
                answers.push(ok_json(client.get(u).header("X-Actor", ACTOR).send())?);
            }
            Step::Audit => answers.push(ok_json(client.get(s.url(&["audit"])).send())?),
        }
        if KILL_AFTER.contains(&i) {
            server.kill();
            tear_log(dir)?;
            server = Server::start(dir)?;
        }
    }
    let export = client.get(server.url(&["export"])).send().and_then(|r| r.text()).map_err(|e| e.to_string())?;
    Ok((answers, export))
}

pub fn session() -> Outcome {
    let cli_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let http_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (mut cli_answers, cli_export) = run_cli(cli_dir.path())?;
    let (mut http_answers, http_export) = run_http(http_dir.path())?;

    let cli_log = export_lines(&cli_export)?;
    let http_log = export_lines(&http_export)?;
    ensure!(!cli_log.is_empty(), "CLI export is empty");
    ensure!(
        cli_log == http_log,
        "exported logs differ: {} CLI records vs {} HTTP records",
        cli_log.len(),
        http_log.len()
    );

    cli_answers.iter_mut().for_each(strip_timestamps);
    http_answers.iter_mut().for_each(strip_timestamps);
    for (i, (c, h)) in cli_answers.iter().zip(&http_answers).enumerate() {
        ensure!(c == h, "query answer {i} differs:\nCLI  {c}\nHTTP {h}");
    }
    ensure!(cli_answers.len() == http_answers.len(), "different number of answers");

    let searches = &cli_answers[..2];
    ensure!(
        searches[0]["matches"].as_array().is_some_and(|m| m.len() == 1),
        "forecast search should find the purpose item: {}",
        searches[0]
    );
    Ok(format!(
        "{} log records identical, {} query answers identical, {} kill -9 restarts",
        cli_log.len(),
        cli_answers.len(),
        KILL_AFTER.len()
    ))
}
