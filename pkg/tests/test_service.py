"""HTTP facade: explanation endpoints, evaluations, ratings, experiments."""

import json

import pytest
from fastapi.testclient import TestClient

from conftest import asset_text
from goldens import INSTANCE_INPUT_EXPLANATION, SPOT_OUTPUT_EXPLANATION
from qaexplain.model import InputQueryKey
from qaexplain.queries import default_query_registry
from qaexplain.service import ServiceConfig, create_app
from qaexplain.testing import FixtureTriplestore


@pytest.fixture()
def client(tmp_path):
    config = ServiceConfig(store_dir=tmp_path / "store")
    with TestClient(create_app(config)) as c:
        c.store_dir = tmp_path / "store"
        yield c


@pytest.fixture(scope="module")
def instance_query() -> str:
    return default_query_registry().by_key(InputQueryKey.INSTANCE_ANNOTATIONS).text


@pytest.fixture(scope="module")
def fixture_triples() -> str:
    return asset_text("fixtures/textrazor_spot.nt")


def post_output_template(client, triples: str) -> dict:
    response = client.post("/explanations/output", json={"triples": triples, "method": "template"})
    assert response.status_code == 200, response.text
    return response.json()


def test_healthz(client):
    assert client.get("/healthz").json() == {"status": "ok"}


def test_openapi_served(client):
    paths = client.get("/openapi.json").json()["paths"]
    assert "/explanations/input" in paths
    assert "/explanations/output" in paths


def test_input_template_matches_golden(client, instance_query):
    response = client.post(
        "/explanations/input", json={"query": instance_query, "method": "template"}
    )
    assert response.status_code == 200
    body = response.json()
    assert body["text"] == INSTANCE_INPUT_EXPLANATION
    assert body["subjectKind"] == "input"
    assert body["method"] == "template"
    assert body["modelId"] is None
    assert body["prompt"] is None


def test_input_template_id_is_stable(client, instance_query):
    first = client.post("/explanations/input", json={"query": instance_query, "method": "template"})
    second = client.post("/explanations/input", json={"query": instance_query, "method": "template"})
    assert first.json()["id"] == second.json()["id"]
    assert client.get("/explanations").json()["total"] == 1


def test_input_template_rejects_unclassifiable(client):
    bad = "PREFIX qa: <http://www.wdaqua.eu/qa#> SELECT ?x FROM <urn:g> WHERE { ?x qa:unheardOf ?y . }"
    response = client.post("/explanations/input", json={"query": bad, "method": "template"})
    assert response.status_code == 400

    not_select = client.post("/explanations/input", json={"query": "ASK { ?s ?p ?o }", "method": "template"})
    assert not_select.status_code == 400


def test_input_llm_mock(client, instance_query):
    response = client.post(
        "/explanations/input",
        json={
            "query": instance_query,
            "method": "llm",
            "shots": 1,
            "component": "NED-DBpediaSpotlight",
        },
    )
    assert response.status_code == 200
    body = response.json()
    assert body["text"].strip()
    assert body["modelId"] == "mock"
    assert body["prompt"].endswith("Don't use more than 3 sentences.")
    assert 'used by the component "NED-DBpediaSpotlight"' in body["prompt"]


def test_input_llm_forwards_unclassifiable_query(client):
    response = client.post(
        "/explanations/input",
        json={"query": "SELECT ?s FROM <urn:g> WHERE { ?s <urn:p> ?o . }", "method": "llm"},
    )
    assert response.status_code == 200
    assert response.json()["text"].strip()


def test_output_template_matches_golden(client, fixture_triples):
    body = post_output_template(client, fixture_triples)
    assert body["text"] == SPOT_OUTPUT_EXPLANATION
    assert body["subjectKind"] == "output"
    summaries = body["annotations"]
    assert len(summaries) == 1
    assert summaries[0]["kind"] == "spot_instance"
    assert summaries[0]["start"] == 10
    assert summaries[0]["end"] == 16
    assert summaries[0]["annotatedBy"] == "urn:qanary:TextRazor"


def test_output_requires_exactly_one_source(client, fixture_triples):
    both = client.post(
        "/explanations/output",
        json={
            "triples": fixture_triples,
            "endpointRef": {"endpoint": "http://x", "graph": "urn:g", "component": "urn:c"},
            "method": "template",
        },
    )
    assert both.status_code == 400
    neither = client.post("/explanations/output", json={"method": "template"})
    assert neither.status_code == 400


def test_output_rejects_bad_triples(client):
    garbage = client.post(
        "/explanations/output", json={"triples": "<a> <b> malformed", "method": "template"}
    )
    assert garbage.status_code == 400

    variables = client.post(
        "/explanations/output", json={"triples": "?s <urn:p> <urn:o> .", "method": "template"}
    )
    assert variables.status_code == 400


def test_inline_and_endpoint_paths_agree(client, fixture_triples, spot_triple_set):
    inline = post_output_template(client, fixture_triples)
    with FixtureTriplestore() as store:
        store.seed(spot_triple_set.graph, spot_triple_set.triples)
        response = client.post(
            "/explanations/output",
            json={
                "endpointRef": {
                    "endpoint": store.url,
                    "graph": spot_triple_set.graph.value,
                    "component": spot_triple_set.component.value,
                },
                "method": "template",
            },
        )
    assert response.status_code == 200
    assert response.json()["text"] == inline["text"]
    assert response.json()["id"] == inline["id"]


def test_endpoint_errors_map_to_http_statuses(client, spot_triple_set):
    with FixtureTriplestore() as store:
        store.seed(spot_triple_set.graph, spot_triple_set.triples)
        missing_graph = client.post(
            "/explanations/output",
            json={
                "endpointRef": {
                    "endpoint": store.url,
                    "graph": "urn:qanary:process:not-there",
                    "component": spot_triple_set.component.value,
                },
                "method": "template",
            },
        )
    assert missing_graph.status_code == 404

    unreachable = client.post(
        "/explanations/output",
        json={
            "endpointRef": {
                "endpoint": "http://127.0.0.1:9/sparql",
                "graph": spot_triple_set.graph.value,
                "component": spot_triple_set.component.value,
            },
            "method": "template",
        },
    )
    assert unreachable.status_code == 502


def test_output_llm_and_evaluation(client, fixture_triples):
    created = client.post(
        "/explanations/output",
        json={"triples": fixture_triples, "method": "llm", "shots": 1, "exampleKinds": ["spot_instance"]},
    )
    assert created.status_code == 200
    body = created.json()
    assert body["prompt"].endswith("Don't introduce your answer and only return the result.")

    evaluation = client.post("/evaluations", json={"explanationId": body["id"]})
    assert evaluation.status_code == 200
    result = evaluation.json()
    assert 1 <= result["prefixRating"] <= 3
    assert all(1 <= r <= 3 for r in result["annotationRatings"])
    assert 2.0 <= result["qE"] <= 6.0
    assert result["prefixChecks"]
    assert len(result["annotationChecks"]) == len(result["annotationRatings"])


def test_template_output_evaluates_to_max_score(client, fixture_triples):
    body = post_output_template(client, fixture_triples)
    evaluation = client.post("/evaluations", json={"explanationId": body["id"]}).json()
    assert evaluation["prefixRating"] == 3
    assert evaluation["annotationRatings"] == [3]
    assert evaluation["qE"] == 6.0
    assert evaluation["qEExact"] == "6"
    assert evaluation["depreciations"] == []


def test_evaluation_error_paths(client, instance_query):
    unknown = client.post("/evaluations", json={"explanationId": "deadbeef00000000"})
    assert unknown.status_code == 404

    created = client.post("/explanations/input", json={"query": instance_query, "method": "template"})
    input_eval = client.post("/evaluations", json={"explanationId": created.json()["id"]})
    assert input_eval.status_code == 400


def test_example_kinds_must_match_shots(client, fixture_triples):
    response = client.post(
        "/explanations/output",
        json={"triples": fixture_triples, "method": "llm", "shots": 2, "exampleKinds": ["instance"]},
    )
    assert response.status_code == 400


def test_rating_flow(client, instance_query, fixture_triples):
    input_id = client.post(
        "/explanations/input", json={"query": instance_query, "method": "template"}
    ).json()["id"]
    output_id = post_output_template(client, fixture_triples)["id"]

    ok = client.post(
        "/ratings",
        json={"explanationId": input_id, "metric": "correctness", "value": 4},
        headers={"X-Rater-Id": "alice"},
    )
    assert ok.status_code == 200
    assert ok.json()["raterId"] == "alice"

    no_header = client.post(
        "/ratings", json={"explanationId": input_id, "metric": "correctness", "value": 4}
    )
    assert no_header.status_code == 422

    unknown = client.post(
        "/ratings",
        json={"explanationId": "deadbeef00000000", "metric": "correctness", "value": 4},
        headers={"X-Rater-Id": "alice"},
    )
    assert unknown.status_code == 404

    wrong_metric_input = client.post(
        "/ratings",
        json={"explanationId": input_id, "metric": "quality", "value": 4},
        headers={"X-Rater-Id": "alice"},
    )
    assert wrong_metric_input.status_code == 422

    wrong_metric_output = client.post(
        "/ratings",
        json={"explanationId": output_id, "metric": "usefulness", "value": 4},
        headers={"X-Rater-Id": "alice"},
    )
    assert wrong_metric_output.status_code == 422

    out_of_range = client.post(
        "/ratings",
        json={"explanationId": input_id, "metric": "correctness", "value": 6},
        headers={"X-Rater-Id": "alice"},
    )
    assert out_of_range.status_code == 422


def test_rating_resubmission_overwrites(client, instance_query):
    input_id = client.post(
        "/explanations/input", json={"query": instance_query, "method": "template"}
    ).json()["id"]
    for value in (5, 2):
        client.post(
            "/ratings",
            json={"explanationId": input_id, "metric": "correctness", "value": value},
            headers={"X-Rater-Id": "alice"},
        )
    rows = client.get("/ratings", params={"explanationId": input_id}).json()
    assert len(rows) == 1
    assert rows[0]["value"] == 2

    aggregate = client.get("/ratings/aggregate").json()
    assert aggregate == [{"metric": "correctness", "method": "template", "count": 1, "mean": 2.0}]

    export = client.get("/ratings/export")
    assert export.headers["content-type"].startswith("text/csv")
    assert export.text == "metric,method,count,mean\ncorrectness,template,1,2.0000\n"


def test_export_means_per_metric_and_method(client, instance_query, fixture_triples):
    input_id = client.post(
        "/explanations/input", json={"query": instance_query, "method": "template"}
    ).json()["id"]
    output_id = post_output_template(client, fixture_triples)["id"]

    for rater, value in (("a", 5), ("b", 4)):
        client.post(
            "/ratings",
            json={"explanationId": input_id, "metric": "correctness", "value": value},
            headers={"X-Rater-Id": rater},
        )
    client.post(
        "/ratings",
        json={"explanationId": input_id, "metric": "usefulness", "value": 3},
        headers={"X-Rater-Id": "a"},
    )
    client.post(
        "/ratings",
        json={"explanationId": output_id, "metric": "quality", "value": 4},
        headers={"X-Rater-Id": "a"},
    )
    export = client.get("/ratings/export").text.splitlines()
    assert export[0] == "metric,method,count,mean"
    assert "correctness,template,2,4.5000" in export
    assert "usefulness,template,1,3.0000" in export
    assert "quality,template,1,4.0000" in export


def test_listing_filters_and_pagination(client, instance_query, fixture_triples):
    client.post("/explanations/input", json={"query": instance_query, "method": "template"})
    post_output_template(client, fixture_triples)
    client.post(
        "/explanations/output", json={"triples": fixture_triples, "method": "llm", "shots": 0}
    )

    everything = client.get("/explanations").json()
    assert everything["total"] == 3

    templates = client.get("/explanations", params={"method": "template"}).json()
    assert templates["total"] == 2

    outputs = client.get("/explanations", params={"subjectKind": "output"}).json()
    assert outputs["total"] == 2

    by_component = client.get("/explanations", params={"component": "urn:qanary:TextRazor"}).json()
    assert by_component["total"] == 2

    page = client.get("/explanations", params={"limit": 1, "offset": 1}).json()
    assert page["total"] == 3
    assert len(page["items"]) == 1

    single = client.get(f"/explanations/{templates['items'][0]['id']}")
    assert single.status_code == 200
    assert client.get("/explanations/0000000000000000").status_code == 404


def test_store_survives_restart(tmp_path, instance_query):
    config = ServiceConfig(store_dir=tmp_path / "store")
    with TestClient(create_app(config)) as first:
        created = first.post(
            "/explanations/input", json={"query": instance_query, "method": "template"}
        ).json()
        first.post(
            "/ratings",
            json={"explanationId": created["id"], "metric": "usefulness", "value": 5},
            headers={"X-Rater-Id": "bob"},
        )

    with TestClient(create_app(ServiceConfig(store_dir=tmp_path / "store"))) as second:
        reloaded = second.get(f"/explanations/{created['id']}")
        assert reloaded.status_code == 200
        assert reloaded.json()["text"] == created["text"]
        rows = second.get("/ratings", params={"explanationId": created["id"]}).json()
        assert [(r["raterId"], r["metric"], r["value"]) for r in rows] == [("bob", "usefulness", 5)]


def test_experiments_endpoint_runs_mock_plan(client, tmp_path):
    response = client.post(
        "/experiments/run",
        json={
            "plan": {"shots": 0, "modelIds": ["mock"], "trialsPerCell": 1, "seed": 5},
            "outDir": str(tmp_path / "exp"),
        },
    )
    assert response.status_code == 200
    body = response.json()
    assert body["trialCount"] == 4
    assert body["exclusionCount"] == 0
    assert len(body["matrix"]["cells"]) == 4

    live = client.post(
        "/experiments/run",
        json={"plan": {"shots": 0, "modelIds": ["gpt-4-0613"], "trialsPerCell": 1}},
    )
    assert live.status_code == 400

    bad = client.post("/experiments/run", json={"plan": {"shots": 7, "modelIds": ["mock"]}})
    assert bad.status_code == 400


def test_cors_preflight_allows_ui_origin(client):
    response = client.options(
        "/explanations",
        headers={
            "Origin": "http://localhost:5173",
            "Access-Control-Request-Method": "GET",
            "Access-Control-Request-Headers": "X-Rater-Id",
        },
    )
    assert response.status_code == 200
    assert response.headers.get("access-control-allow-origin") == "*"


def test_llm_model_without_endpoint_is_rejected(client, fixture_triples):
    response = client.post(
        "/explanations/output",
        json={"triples": fixture_triples, "method": "llm", "modelId": "gpt-4-0613"},
    )
    assert response.status_code == 400
    assert "llmEndpoint" in response.json()["detail"]


def test_responses_carry_raw_source_data(client, instance_query, fixture_triples):
    inp = client.post(
        "/explanations/input", json={"query": instance_query, "method": "template"}
    ).json()
    assert inp["rawData"] == instance_query

    out = post_output_template(client, fixture_triples)
    # output payload is the parsed-and-reserialized triple set
    assert "urn:qanary:TextRazor" in out["rawData"]
    from qaexplain.ntriples import parse_triple_set

    reparsed = parse_triple_set(out["rawData"], graph="urn:qanary:process:inline")
    original = parse_triple_set(fixture_triples, graph="urn:qanary:process:inline")
    assert sorted(map(str, reparsed.triples)) == sorted(map(str, original.triples))

    listed = client.get("/explanations").json()["items"]
    assert all(item["rawData"] for item in listed)


def test_static_mount_serves_built_ui(tmp_path):
    ui = tmp_path / "dist"
    ui.mkdir()
    (ui / "index.html").write_text("<!doctype html><p>rating ui</p>", encoding="utf-8")
    config = ServiceConfig(store_dir=tmp_path / "store", static_dir=ui)
    with TestClient(create_app(config)) as c:
        page = c.get("/ui/")
        assert page.status_code == 200
        assert "rating ui" in page.text
    # without the directory configured the mount is absent
    bare = ServiceConfig(store_dir=tmp_path / "store2")
    with TestClient(create_app(bare)) as c:
        assert c.get("/ui/").status_code == 404
