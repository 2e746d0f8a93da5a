use std::time::{Duration, Instant};

use futures::{SinkExt, StreamExt};
use serde_json::{json, Value};
use taxelwbc::bundled;
use taxelwbc::serve::{serve_on, ServeOptions, SessionSetup};
use taxelwbc_core::sim::ControllerKind;
use tokio::net::TcpListener;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

type Socket = WebSocketStream<MaybeTlsStream<tokio::net::TcpStream>>;

async fn start(controller: ControllerKind) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let plant = bundled::plant();
    let (gains, _) = bundled::gains();
    let setup = SessionSetup::idle(plant, gains, controller, 0);
    tokio::spawn(serve_on(listener, setup, ServeOptions::default()));
    format!("ws://{addr}/ws")
}

async fn connect(url: &str) -> Socket {
    connect_async(url).await.unwrap().0
}

async fn next_json(ws: &mut Socket) -> Value {
    loop {
        let msg =
            tokio::time::timeout(Duration::from_secs(5), ws.next()).await.expect("frame in time").unwrap().unwrap();
        if let Message::Text(t) = msg {
            return serde_json::from_str(&t).unwrap();
        }
    }
}

/// Next frame of `kind`, skipping others.
async fn next_of(ws: &mut Socket, kind: &str) -> Value {
    loop {
        let v = next_json(ws).await;
        assert_eq!(v["protocol"], 1, "{v}");
        if v["type"] == kind {
            return v;
        }
    }
}

async fn send(ws: &mut Socket, v: Value) {
    ws.send(Message::Text(v.to_string().into())).await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn idle_session_streams_equilibrium() {
    let url = start(ControllerKind::Impedance).await;
    let mut ws = connect(&url).await;
    let hello = next_json(&mut ws).await;
    assert_eq!(hello["type"], "hello");
    assert_eq!(hello["taxels"].as_array().unwrap().len(), 11);
    assert_eq!(hello["snapshot_hz"], 30.0);

    let mut times = Vec::new();
    let t0 = Instant::now();
    for _ in 0..10 {
        let s = next_of(&mut ws, "snapshot").await;
        times.push(s["t"].as_f64().unwrap());
        let base: Vec<f64> = s["base"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        assert!(base.iter().all(|b| b.abs() < 1e-9), "{base:?}");
        assert!(s["taxel_forces"].as_array().unwrap().iter().all(|f| f == 0.0));
    }
    let wall = t0.elapsed().as_secs_f64();
    assert!(times.windows(2).all(|w| w[1] >= w[0]));
    // ten frames at 30 Hz, roughly real time
    assert!(wall > 0.2 && wall < 1.0, "{wall}");
    let sim = times[9] - times[0];
    assert!((sim - wall).abs() < 0.15, "sim {sim} s vs wall {wall} s");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn front_push_makes_the_base_recede() {
    let url = start(ControllerKind::Impedance).await;
    let mut ws = connect(&url).await;
    next_of(&mut ws, "hello").await;
    let x0 = next_of(&mut ws, "snapshot").await["base"][0].as_f64().unwrap();

    send(&mut ws, json!({"type": "apply_force", "target": 6, "magnitude": 30.0, "duration": 2.0, "id": 1})).await;
    let sent = Instant::now();
    let mut acked = false;
    loop {
        let v = next_json(&mut ws).await;
        if v["type"] == "ack" {
            assert_eq!(v["id"], 1);
            assert_eq!(v["command"], "apply_force");
            acked = true;
        }
        if v["type"] == "snapshot" && acked {
            let x = v["base"][0].as_f64().unwrap();
            if x < x0 - 1e-3 {
                assert!(v["applied_forces"][5].as_f64().unwrap() == 30.0);
                break;
            }
        }
        assert!(sent.elapsed() < Duration::from_millis(500), "no recession within 500 ms");
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn malformed_messages_get_error_frames_and_session_continues() {
    let url = start(ControllerKind::Impedance).await;
    let mut ws = connect(&url).await;
    next_of(&mut ws, "hello").await;

    ws.send(Message::Text("{not json".into())).await.unwrap();
    let e = next_of(&mut ws, "error").await;
    assert!(e["message"].as_str().unwrap().contains("malformed"));

    send(&mut ws, json!({"type": "apply_force", "target": 42, "magnitude": 5.0, "duration": 1.0, "id": 9})).await;
    let e = next_of(&mut ws, "error").await;
    assert_eq!(e["id"], 9);
    assert!(e["message"].as_str().unwrap().contains("taxel 42"), "{e}");

    send(&mut ws, json!({"type": "set_gains", "gains": {"weights": {"eta_base": -1.0}}, "id": 10})).await;
    assert_eq!(next_of(&mut ws, "error").await["id"], 10);

    send(&mut ws, json!({"type": "set_controller", "controller": "impedance", "protocol": 2, "id": 11})).await;
    assert_eq!(next_of(&mut ws, "error").await["id"], 11);

    send(&mut ws, json!({"type": "set_gains", "gains": {"weights": {"eta_base": 3.0}}, "id": 12})).await;
    let ack = next_of(&mut ws, "ack").await;
    assert_eq!(ack["id"], 12);
    next_of(&mut ws, "snapshot").await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn controller_switch_is_acknowledged_and_applied() {
    let url = start(ControllerKind::Impedance).await;
    let mut ws = connect(&url).await;
    next_of(&mut ws, "hello").await;
    assert_eq!(next_of(&mut ws, "snapshot").await["controller"], "impedance");

    send(&mut ws, json!({"type": "set_controller", "controller": "follow_me", "id": 5})).await;
    let ack = next_of(&mut ws, "ack").await;
    assert_eq!((ack["id"].clone(), ack["command"].clone()), (json!(5), json!("set_controller")));
    let t_switch = ack["t"].as_f64().unwrap();
    loop {
        let s = next_of(&mut ws, "snapshot").await;
        if s["t"].as_f64().unwrap() > t_switch {
            assert_eq!(s["controller"], "follow_me");
            break;
        }
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn reconnecting_client_sees_the_same_stream() {
    let url = start(ControllerKind::Impedance).await;
    let mut a = connect(&url).await;
    next_of(&mut a, "hello").await;
    send(&mut a, json!({"type": "apply_force", "target": 6, "magnitude": 30.0, "duration": 0.3})).await;
    next_of(&mut a, "ack").await;
    tokio::time::sleep(Duration::from_millis(400)).await;
    let before = next_of(&mut a, "snapshot").await;
    a.close(None).await.unwrap();
    drop(a);

    // a fresh client and a second one that stays attached agree frame for frame
    let mut b = connect(&url).await;
    let mut c = connect(&url).await;
    next_of(&mut b, "hello").await;
    next_of(&mut c, "hello").await;
    let sb = next_of(&mut b, "snapshot").await;
    assert!(sb["t"].as_f64().unwrap() > before["t"].as_f64().unwrap());
    // the push moved the base and the session kept that state across the reconnect
    assert!(sb["base"][0].as_f64().unwrap() < -1e-3, "{}", sb["base"]);
    // compare a later frame, once both subscriptions are surely live
    next_of(&mut b, "snapshot").await;
    let sb = next_of(&mut b, "snapshot").await;
    let t = sb["t"].as_f64().unwrap();
    let sc = loop {
        let s = next_of(&mut c, "snapshot").await;
        if s["t"].as_f64().unwrap() >= t {
            break s;
        }
    };
    assert_eq!(sb, sc);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn stalled_client_does_not_hold_back_the_simulation() {
    let url = start(ControllerKind::Impedance).await;
    // never read from this one
    let _stalled = connect(&url).await;
    let mut live = connect(&url).await;
    next_of(&mut live, "hello").await;
    let t0 = next_of(&mut live, "snapshot").await["t"].as_f64().unwrap();
    let w0 = Instant::now();
    tokio::time::sleep(Duration::from_millis(1500)).await;
    let t1 = loop {
        // drain anything buffered, keep the newest
        let s = next_of(&mut live, "snapshot").await;
        let t = s["t"].as_f64().unwrap();
        if t - t0 > 1.0 {
            break t;
        }
        assert!(w0.elapsed() < Duration::from_secs(4), "simulation stalled at t = {t}");
    };
    assert!(t1 - t0 > 1.0);
}
