//! Starts the live endpoint on a free port and drives it with a plain TCP
//! client speaking newline-delimited JSON. Browsers connect to the same port
//! over WebSocket.
//!
//! ```text
//! cargo run --example headless_client
//! ```

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;

use serde_json::Value;
use vss_sim::server::{self, ServerConfig};
use vss_sim::SimConfig;

fn main() -> vss_sim::Result<()> {
    let mut config = ServerConfig::new("127.0.0.1:0".parse().unwrap(), SimConfig::default());
    config.speed = 10.0;
    let server = server::start(config)?;
    println!("endpoint on {}", server.local_addr());

    let mut stream = TcpStream::connect(server.local_addr())?;
    let reader = BufReader::new(stream.try_clone()?);
    let mut clicks = 0;
    for line in reader.lines() {
        let frame: Value = serde_json::from_str(&line?)?;
        match frame["type"].as_str() {
            Some("hello") => println!("hello: {} detents", frame["n_detents"]),
            Some("event") => println!("event {} at t = {:.3}", frame["kind"], frame["t"]),
            Some("state") => {
                let t = frame["t"].as_f64().unwrap_or(0.0);
                if t >= 1.0 + clicks as f64 && clicks < 3 {
                    stream.write_all(b"{\"type\":\"shift_up\"}\n")?;
                    clicks += 1;
                }
                if t >= 5.0 {
                    println!("t = {t:.2}: detent {}, k = {:.2} Nm/rad", frame["detent"], frame["k"]);
                    break;
                }
            }
            _ => println!("{frame}"),
        }
    }
    drop(stream);
    server.shutdown()
}
