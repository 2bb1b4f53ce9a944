use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::thread;
use std::time::Duration;

use cppgen_core::policy::{
    extract_segments, fetch_policy, parse_structure, ExtractHooks, FetchError, HighlightKind, MatchConfig,
    PolicySource, FALLBACK_TEXT,
};
use cppgen_core::{DataType, KeywordResource, Taxonomy};

const POLICY: &str = r#"<html><head><style>p { color: red }</style></head><body>
<nav>Home | Blog</nav>
<h1>Privacy Policy</h1>
<p>This policy explains our practices.</p>
<h2>Information We Collect</h2>
<p>We collect your name, email address and phone number when you sign up. With your permission we read your precise location to show nearby stores.</p>
<p>We store your home.</p>
<p>Nous recueillons votre adresse e-mail et votre numéro de téléphone pour vous contacter.</p>
<h2>How We Share Information</h2>
<p>We share your email with delivery partners.</p>
<script>var email = "tracking";</script>
</body></html>"#;

fn respond(mut stream: TcpStream) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut request_line = String::new();
    reader.read_line(&mut request_line).unwrap();
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap() == 0 || line == "\r\n" {
            break;
        }
    }
    let path = request_line.split_whitespace().nth(1).unwrap_or("/").to_string();
    let (status, extra, body) = match path.as_str() {
        "/policy" => ("200 OK", String::new(), POLICY.to_string()),
        "/old" => ("302 Found", "Location: /policy\r\n".to_string(), String::new()),
        "/loop" => ("302 Found", "Location: /loop\r\n".to_string(), String::new()),
        "/slow" => {
            thread::sleep(Duration::from_secs(3));
            ("200 OK", String::new(), POLICY.to_string())
        }
        _ => ("404 Not Found", String::new(), "missing".to_string()),
    };
    let _ = write!(
        stream,
        "HTTP/1.1 {status}\r\n{extra}Content-Type: text/html\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
}

fn serve() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        for stream in listener.incoming().flatten() {
            thread::spawn(move || respond(stream));
        }
    });
    format!("http://{addr}")
}

fn fetch(url: String, secs: u64) -> Result<cppgen_core::policy::Fetched, FetchError> {
    fetch_policy(&PolicySource::Url(url), Duration::from_secs(secs))
}

#[test]
fn redirect_is_followed_and_final_url_recorded() {
    let base = serve();
    let got = fetch(format!("{base}/old"), 10).unwrap();
    assert_eq!(got.body, POLICY.as_bytes());
    assert_eq!(got.final_location, format!("{base}/policy"));
}

#[test]
fn fetch_failures_are_distinct() {
    let base = serve();
    match fetch(format!("{base}/missing"), 10) {
        Err(e @ FetchError::Status { status: 404, .. }) => assert!(e.is_external()),
        other => panic!("{other:?}"),
    }
    assert!(matches!(fetch(format!("{base}/loop"), 10), Err(FetchError::TooManyRedirects(_))));
    assert!(matches!(fetch(format!("{base}/slow"), 1), Err(FetchError::Timeout(_))));
    let bad = fetch("ftp://example.org/policy".into(), 1).unwrap_err();
    assert!(matches!(bad, FetchError::BadUrl(_)) && !bad.is_external());

    let closed = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    match fetch(format!("http://{closed}/policy"), 2) {
        Err(e) => assert!(e.is_external(), "{e:?}"),
        Ok(_) => panic!("connection to a closed port succeeded"),
    }
}

#[test]
fn local_file_source() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("policy.html");
    std::fs::write(&p, POLICY).unwrap();
    let got = fetch_policy(&PolicySource::Path(p.clone()), Duration::from_secs(1)).unwrap();
    assert_eq!(got.body, POLICY.as_bytes());
    let err = fetch_policy(&PolicySource::Path(dir.path().join("nope.html")), Duration::from_secs(1)).unwrap_err();
    assert!(!err.is_external());
}

#[test]
fn downloaded_policy_yields_grouped_segments() {
    let base = serve();
    let fetched = fetch(format!("{base}/old"), 10).unwrap();
    let doc = parse_structure(&fetched.body, &fetched.final_location).unwrap();
    assert!(doc.structured);
    let all_text: String = doc.sections.iter().flat_map(|s| s.paragraphs.clone()).collect();
    assert!(!all_text.contains("tracking") && !all_text.contains("color") && !all_text.contains("Blog"));

    let cfg = MatchConfig {
        phrase_sim_threshold: 0.5,
        ..MatchConfig::default()
    };
    let groups = extract_segments(
        &doc,
        &KeywordResource::default(),
        &Taxonomy::builtin(),
        None,
        &cfg,
        ExtractHooks::default(),
    );
    assert_eq!(groups.len(), 12);
    let by_type = |t: DataType| groups.iter().find(|g| g.data_type == t).unwrap();
    let signup = "We collect your name, email address and phone number when you sign up.";
    for t in [DataType::Name, DataType::Email, DataType::Phone] {
        assert_eq!(by_type(t).sentence_texts(), [signup], "{t}");
    }
    assert_eq!(
        by_type(DataType::Location).sentence_texts(),
        ["With your permission we read your precise location to show nearby stores."]
    );

    let address = by_type(DataType::Address);
    assert_eq!(address.sentence_texts(), ["We store your home."]);
    let h = &address.highlights[0];
    assert_eq!(h.kind, HighlightKind::NounChunk);
    assert_eq!(&address.sentences[0].text[h.char_start..h.char_end], "home");

    for t in [DataType::Birthday, DataType::Voices, DataType::SocialMedia] {
        assert!(by_type(t).fallback);
        assert_eq!(by_type(t).display_text(), FALLBACK_TEXT);
    }
    // the sharing section is not about collected data, and the French paragraph is filtered
    assert!(groups
        .iter()
        .flat_map(|g| g.sentence_texts())
        .all(|s| !s.contains("partners") && !s.contains("Nous")));
}

#[test]
fn empty_relevant_section_set_gives_all_fallback() {
    let doc = parse_structure(
        b"<h2>Contact Us</h2><p>Write to us about your email.</p><h2>Changes</h2><p>We may update this.</p>",
        "t",
    )
    .unwrap();
    let groups = extract_segments(
        &doc,
        &KeywordResource::default(),
        &Taxonomy::builtin(),
        None,
        &MatchConfig::default(),
        ExtractHooks::default(),
    );
    assert!(groups.iter().all(|g| g.fallback && g.sentences.is_empty()));
}
