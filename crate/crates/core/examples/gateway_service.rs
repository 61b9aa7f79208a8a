//! Token-guarded services behind the gateway: a registered client with a
//! read capability, a stranger without one, and the same request in both
//! deployment modes.
//!
//! ```text
//! cargo run --example gateway_service
//! ```

use std::error::Error;
use std::sync::Arc;

use serde_json::{json, Value};

use adsb_trust::bench::{Testbed, FEATURE_RESOURCES};
use adsb_trust::chain::Signer;
use adsb_trust::gateway::{
    DeploymentMode, EchoService, Gateway, GatewayConfig, Service, ServiceRequest, H_DECISION_US,
};

fn request(vid: &str, token: Option<adsb_trust::chain::Hash32>, action: &str, id: &str) -> ServiceRequest {
    ServiceRequest {
        requester_vid: vid.into(),
        token_id: token,
        resource: "/features/track".into(),
        action: action.into(),
        body: "hello".into(),
        request_id: id.into(),
    }
}

pub fn run() -> Result<(), Box<dyn Error>> {
    let bed = Testbed::new("gateway-example", 2, 40)?;
    bed.register(&bed.clients[0], "edge-1")?;
    bed.register(&bed.clients[1], "edge-2")?;
    let token = bed.issue(&bed.clients[0].address(), FEATURE_RESOURCES, "read", 10_000, 0)?;

    let count = |req: &ServiceRequest| -> Result<Value, String> { Ok(json!({"len": req.body.len()})) };
    let services: Vec<(String, Arc<dyn Service>)> = vec![
        ("echo".into(), Arc::new(EchoService)),
        ("count".into(), Arc::new(count)),
    ];
    let gw = Gateway::start(bed.chain.clone(), services, GatewayConfig::default())?;
    let client = gw.client();
    println!("gateway at {}, health {}", gw.url(), client.health()?.status);

    let cases = [
        ("granted", request("edge-1", Some(token), "read", "r1")),
        ("write with a read token", request("edge-1", Some(token), "write", "r2")),
        ("without a token header", request("edge-1", None, "read", "r3")),
        ("registered, no token", request("edge-2", None, "read", "r6")),
        ("unregistered", request("nobody", Some(token), "read", "r4")),
    ];
    for (label, req) in &cases {
        let reply = client.service("echo", req)?;
        println!("{label:>24}: {} {} (decision {} us)", reply.status, reply.json(), reply.header_u64(H_DECISION_US));
    }

    gw.set_mode(DeploymentMode::micro(2.0))?;
    let reply = client.service("count", &request("edge-1", Some(token), "read", "r5"))?;
    println!("micro mode: {} {}", reply.status, reply.json());

    let head = client.rpc("head", Value::Null)?;
    println!("ledger height via rpc: {}", head.height);
    for rec in gw.access_log() {
        println!("log {} {} {:?}", rec.request_id, rec.vid, rec.outcome);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run()
}
