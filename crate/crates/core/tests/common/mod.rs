#![allow(dead_code)]

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use dataloop::config::ApiConfig;
use dataloop::knowledge::HashEmbedder;
use dataloop::llm::{ModelBackend, ScriptStep, ScriptedBackend, ScriptedTranscript};
use dataloop::orchestrator::TurnEvent;
use dataloop::server::{router, AppState};

pub struct Server {
    pub base: String,
    pub state: Arc<AppState>,
    pub agent: ureq::Agent,
    _root: tempfile::TempDir,
}

pub fn fenced(code: &str) -> String {
    format!("```python\n{code}\n```")
}

pub const PLOT_CODE: &str = "import pandas as pd\nimport matplotlib.pyplot as plt\ndf = pd.read_csv('toy.csv')\nprint('mean:', df['value'].mean())\ndf['value'].plot.hist()\nplt.savefig('hist.png')";

pub const REPORT_MD: &str = "# Analysis report\n\n## Data\nA toy table.\n\n## Processing\nNone.\n\n## Visualization\n![histogram](workspace/hist.png)\n\n## Model\nNo model.\n\n## Evaluation\nn/a\n\n## Conclusions\nThe mean is 2.5.\n";

/// Programmer script keyed on prompt content.
pub fn programmer() -> Arc<ScriptedBackend> {
    Arc::new(ScriptedBackend::new(ScriptedTranscript::lenient(vec![
        ScriptStep::on("# Report template:", REPORT_MD),
        ScriptStep::on("executed successfully", "The histogram is saved as hist.png; the mean is 2.5."),
        ScriptStep::on("sleep please", fenced("import time\ntime.sleep(1.5)")),
        ScriptStep::on("always fail", fenced("raise RuntimeError('nope')")),
        ScriptStep::on("histogram", fenced(PLOT_CODE)),
        ScriptStep::on("RuntimeError", fenced("raise RuntimeError('nope')")),
        ScriptStep::any("I can only help with data analysis."),
    ])))
}

pub fn start(config_tweak: impl FnOnce(&mut ApiConfig)) -> Server {
    let root = tempfile::tempdir().unwrap();
    let mut config = ApiConfig {
        storage_root: root.path().join("sessions"),
        knowledge_dir: root.path().join("knowledge"),
        ..ApiConfig::default()
    };
    config.loop_config.max_attempts = 2;
    config.loop_config.execute_timeout = Duration::from_secs(20);
    config_tweak(&mut config);
    let inspector: Arc<dyn ModelBackend> = Arc::new(ScriptedBackend::constant("Check the exception message."));
    let state =
        Arc::new(AppState::new(config, programmer(), inspector, Arc::new(HashEmbedder::default())).unwrap());
    let rt = tokio::runtime::Runtime::new().unwrap();
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let addr: SocketAddr = listener.local_addr().unwrap();
    let app = router(state.clone());
    std::thread::spawn(move || rt.block_on(async move { axum::serve(listener, app).await.unwrap() }));
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    Server { base: format!("http://{addr}"), state, agent, _root: root }
}

pub struct Reply {
    pub status: u16,
    pub body: String,
    pub bytes: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_str(&self.body).unwrap_or(serde_json::Value::Null)
    }
}

fn finish(resp: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Reply {
    let mut resp = resp.expect("request reaches the server");
    let status = resp.status().as_u16();
    let bytes = resp.body_mut().with_config().limit(64 << 20).read_to_vec().unwrap();
    Reply { status, body: String::from_utf8_lossy(&bytes).into_owned(), bytes }
}

impl Server {
    pub fn get(&self, path: &str) -> Reply {
        finish(self.agent.get(format!("{}{path}", self.base)).call())
    }

    pub fn post_json(&self, path: &str, body: serde_json::Value) -> Reply {
        finish(self.agent.post(format!("{}{path}", self.base)).send_json(body))
    }

    pub fn post_empty(&self, path: &str) -> Reply {
        finish(self.agent.post(format!("{}{path}", self.base)).send_empty())
    }

    pub fn delete(&self, path: &str) -> Reply {
        finish(self.agent.delete(format!("{}{path}", self.base)).call())
    }

    pub fn upload(&self, session: &str, name: &str, bytes: &[u8]) -> Reply {
        let boundary = "----dataloop-test-boundary";
        let mut body = format!(
            "--{boundary}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"{name}\"\r\nContent-Type: text/csv\r\n\r\n"
        )
        .into_bytes();
        body.extend_from_slice(bytes);
        body.extend_from_slice(format!("\r\n--{boundary}--\r\n").as_bytes());
        finish(
            self.agent
                .post(format!("{}/sessions/{session}/data", self.base))
                .header("Content-Type", format!("multipart/form-data; boundary={boundary}"))
                .send(&body[..]),
        )
    }

    pub fn new_session(&self) -> String {
        let r = self.post_empty("/sessions");
        assert_eq!(r.status, 201, "{}", r.body);
        r.json()["id"].as_str().unwrap().to_string()
    }
}

/// Parses a server-sent event stream body into turn events.
pub fn sse_events(body: &str) -> Vec<TurnEvent> {
    body.split("\n\n")
        .filter_map(|block| {
            let data: Vec<&str> = block.lines().filter_map(|l| l.strip_prefix("data:")).map(str::trim_start).collect();
            (!data.is_empty()).then(|| serde_json::from_str(&data.join("\n")).expect("event json"))
        })
        .collect()
}

pub fn gapless_single_terminal(events: &[TurnEvent]) -> bool {
    !events.is_empty()
        && events.iter().enumerate().all(|(i, e)| e.seq == i as u64)
        && events.iter().filter(|e| e.kind.is_terminal()).count() == 1
        && events.last().unwrap().kind.is_terminal()
}

pub const TOY_CSV: &str = "id,value,group\n1,1,a\n2,2,b\n3,3,a\n4,4,NA\n";
