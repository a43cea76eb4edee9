use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::TcpListener;
use std::sync::Arc;
use std::thread;

use crate::env::protocol::Hub;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Transport {
    /// Listen on a TCP address such as `127.0.0.1:7878`.
    Tcp(String),
    /// One session stream over standard input and output.
    Stdio,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServerConfig {
    pub transport: Transport,
    pub max_sessions: usize,
}

/// Runs the protocol server until the transport closes.
pub fn serve(config: &ServerConfig) -> Result<()> {
    let hub = Arc::new(Hub::new(config.max_sessions));
    match &config.transport {
        Transport::Tcp(addr) => serve_tcp(TcpListener::bind(addr)?, hub),
        Transport::Stdio => serve_stdio(&hub),
    }
}

/// Accepts connections forever, one thread each.
pub fn serve_tcp(listener: TcpListener, hub: Arc<Hub>) -> Result<()> {
    for stream in listener.incoming() {
        let stream = match stream {
            Ok(s) => s,
            Err(_) => continue,
        };
        let hub = hub.clone();
        thread::spawn(move || {
            let _ = stream.set_nodelay(true);
            let Ok(read_half) = stream.try_clone() else { return };
            let _ = serve_stream(BufReader::new(read_half), BufWriter::new(stream), &hub);
        });
    }
    Ok(())
}

pub fn serve_stdio(hub: &Hub) -> Result<()> {
    let stdin = io::stdin();
    let stdout = io::stdout();
    serve_stream(stdin.lock(), stdout.lock(), hub)?;
    Ok(())
}

/// Answers requests line by line until end of input.
pub fn serve_stream<R: BufRead, W: Write>(mut reader: R, mut writer: W, hub: &Hub) -> io::Result<()> {
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Ok(());
        }
        let request = line.trim();
        if request.is_empty() {
            continue;
        }
        let reply = hub.handle_line(request);
        writer.write_all(reply.as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
}
