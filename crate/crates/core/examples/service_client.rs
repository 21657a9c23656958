//! Start the HTTP API on an ephemeral port and query it the way a browser
//! client would.
//!
//! ```text
//! cargo run --example service_client
//! ```

use ampdx::engine::SymptomChecker;
use ampdx::service::{router, AppState};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};

async fn request(addr: std::net::SocketAddr, method: &str, path: &str, body: &str) -> std::io::Result<String> {
    let mut stream = TcpStream::connect(addr).await?;
    let head = format!(
        "{method} {path} HTTP/1.1\r\nhost: {addr}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n",
        body.len()
    );
    stream.write_all(head.as_bytes()).await?;
    stream.write_all(body.as_bytes()).await?;
    let mut response = String::new();
    stream.read_to_string(&mut response).await?;
    Ok(response)
}

fn body(response: &str) -> &str {
    response.split("\r\n\r\n").nth(1).unwrap_or("")
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let app = router(AppState::loaded(SymptomChecker::demo()), None);
    let listener = TcpListener::bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?;
    tokio::spawn(async move { axum::serve(listener, app).await });

    println!("GET /api/health\n  {}", body(&request(addr, "GET", "/api/health", "").await?));

    let catalog: serde_json::Value = serde_json::from_str(body(&request(addr, "GET", "/api/catalog", "").await?))?;
    println!(
        "GET /api/catalog\n  {} symptoms, {} diseases",
        catalog["symptoms"].as_array().map_or(0, Vec::len),
        catalog["diseases"].as_array().map_or(0, Vec::len)
    );

    let infer = r#"{"present": [0, 1], "absent": [14], "top_k": 3}"#;
    let response: serde_json::Value = serde_json::from_str(body(&request(addr, "POST", "/api/infer", infer).await?))?;
    println!("POST /api/infer {infer}");
    println!("{}", serde_json::to_string_pretty(&response["ranking"])?);

    let bad = request(addr, "POST", "/api/infer", r#"{"present": [3], "absent": [3]}"#).await?;
    println!("contradictory report -> {}", bad.lines().next().unwrap_or(""));
    Ok(())
}
