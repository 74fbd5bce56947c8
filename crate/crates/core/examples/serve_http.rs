//! HTTP service on an ephemeral port with every session open. Stop with Ctrl-C.
//!
//!     cargo run --example serve_http
//!     curl -s localhost:<port>/api/sessions

use trustlab::bot::StrategyConfig;
use trustlab::questionnaire::QuestionBank;
use trustlab::session::http::{serve, AppState};
use trustlab::session::{ExperimentService, ServiceConfig};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut svc = ExperimentService::new(ServiceConfig::default(), StrategyConfig::shipped(), QuestionBank::shipped())?;
    for slot in 0..svc.sessions().len() {
        svc.open_session(slot)?;
    }
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?;
    println!("listening on http://{addr}");
    println!("  curl -s -XPOST {addr}/api/register -H 'content-type: application/json' -d '{{\"slot\":0}}'");
    serve(listener, AppState::new(svc, None)).await?;
    Ok(())
}
