use std::collections::HashMap;
use std::sync::Arc;

use serde_json::json;
use tiny_http::{Header, Method, Request, Response, Server};

use intentrank_core::combiner::{explain, RankerConfig};
use intentrank_core::engine::{Engine, SearchRequest, Verdict};

struct Reply {
    status: u16,
    body: serde_json::Value,
}

fn reply(status: u16, body: serde_json::Value) -> Reply {
    Reply { status, body }
}

fn params(url: &str) -> (String, HashMap<String, String>) {
    let (path, query) = url.split_once('?').unwrap_or((url, ""));
    let map = form_urlencoded::parse(query.as_bytes()).into_owned().collect();
    (path.to_string(), map)
}

fn error_reply(e: intentrank_core::Error) -> Reply {
    let status = if e.is_data_error() { 400 } else { 500 };
    reply(status, json!({ "error": e.to_string() }))
}

fn handle(engine: &Engine, config: &RankerConfig, method: &Method, url: &str) -> Reply {
    if *method != Method::Get {
        return reply(405, json!({ "error": "only GET is supported" }));
    }
    let (path, p) = params(url);
    let (Some(q), Some(user)) = (p.get("q"), p.get("user")) else {
        if path == "/search" || path == "/explain" {
            return reply(400, json!({ "error": "parameters `q` and `user` are required" }));
        }
        return reply(404, json!({ "error": format!("no route {path}") }));
    };
    let req = SearchRequest::new(q.as_str(), user.as_str());
    match path.as_str() {
        "/search" => {
            let mut cfg = config.clone();
            if let Some(k) = p.get("k") {
                match k.parse::<usize>() {
                    Ok(k) => cfg.k_final = k,
                    Err(_) => return reply(400, json!({ "error": format!("k must be a count, got {k:?}") })),
                }
            }
            match engine.search_with(&req, &cfg) {
                Ok(list) => reply(
                    200,
                    json!({
                        "query": q,
                        "user": user,
                        "config": list.fingerprint,
                        "intents": list.intents,
                        "triggered": list.triggered,
                        "results": list.results,
                    }),
                ),
                Err(e) => error_reply(e),
            }
        }
        "/explain" => {
            let Some(doc) = p.get("doc") else {
                return reply(400, json!({ "error": "parameter `doc` is required" }));
            };
            match engine.locate(&req, doc, config) {
                Ok((verdict, list)) => {
                    let text = match verdict {
                        Verdict::NotRetrieved => None,
                        _ => explain(&list, doc).ok(),
                    };
                    reply(200, json!({ "doc": doc, "verdict": verdict, "explanation": text }))
                }
                Err(e) => error_reply(e),
            }
        }
        _ => reply(404, json!({ "error": format!("no route {path}") })),
    }
}

fn respond(engine: &Engine, config: &RankerConfig, request: Request) {
    let r = handle(engine, config, request.method(), request.url());
    log::info!("{} {} -> {}", request.method(), request.url(), r.status);
    let header = Header::from_bytes("Content-Type", "application/json").expect("static header");
    let resp = Response::from_string(r.body.to_string() + "\n")
        .with_status_code(r.status)
        .with_header(header);
    if let Err(e) = request.respond(resp) {
        log::warn!("failed to send response: {e}");
    }
}

pub fn serve(engine: Engine, config: RankerConfig, addr: &str, threads: usize) -> anyhow::Result<()> {
    let server = Server::http(addr).map_err(|e| anyhow::anyhow!("cannot listen on {addr}: {e}"))?;
    eprintln!("listening on http://{addr}");
    let server = Arc::new(server);
    let shared = Arc::new((engine, config));
    let workers: Vec<_> = (0..threads.max(1))
        .map(|_| {
            let server = Arc::clone(&server);
            let shared = Arc::clone(&shared);
            std::thread::spawn(move || {
                for request in server.incoming_requests() {
                    respond(&shared.0, &shared.1, request);
                }
            })
        })
        .collect();
    for w in workers {
        let _ = w.join();
    }
    Ok(())
}
