//! Driving a live session in simulated time, without a socket.
//!
//! A click is queued and applied at the next step boundary; the pivot then
//! waits for a low-force instant of the swing before it advances.
//!
//! ```text
//! cargo run --example live_session
//! ```

use vss_sim::live::{LiveSession, SessionCommand};
use vss_sim::protocol::ServerMessage;
use vss_sim::{ShiftDirection, SimConfig};

fn main() -> vss_sim::Result<()> {
    let mut session = LiveSession::new(&SimConfig::default(), 50.0)?;
    println!("{}", session.hello().to_json());

    for step in 0..3000 {
        if step == 1000 || step == 2000 {
            session.handle(SessionCommand::Shift(ShiftDirection::Up));
        }
        for msg in session.step()? {
            match msg {
                ServerMessage::Event(e) => println!("t = {:.4} s  {} -> detent {}", e.t, e.kind.as_str(), e.detent),
                ServerMessage::State(s) if step % 500 == 499 => {
                    println!("t = {:.2} s  detent {} k = {:.2} Nm/rad", s.t, s.detent, s.k)
                }
                _ => {}
            }
        }
    }
    Ok(())
}
