import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { outputSeeds, StubService } from "./stub-server.js";

const stub = new StubService(outputSeeds());
let api: ApiClient;

beforeAll(async () => {
  api = new ApiClient(await stub.start());
});

afterAll(async () => {
  await stub.stop();
});

describe("ApiClient", () => {
  it("lists explanations with filters", async () => {
    const page = await api.listExplanations({ method: "template" });
    expect(page.total).toBe(9);
    expect(page.items.every((item) => item.method === "template")).toBe(true);
  });

  it("walks pagination in listAllExplanations", async () => {
    const small = await api.listExplanations({}, 4, 0);
    expect(small.items).toHaveLength(4);
    const all = await api.listAllExplanations();
    expect(all).toHaveLength(18);
    expect(new Set(all.map((e) => e.id)).size).toBe(18);
  });

  it("sends the rater header and round-trips a rating", async () => {
    const ack = await api.submitRating("expert-9", {
      explanationId: "out-t-0",
      metric: "quality",
      value: 5,
    });
    expect(ack.raterId).toBe("expert-9");
    expect(ack.value).toBe(5);
    const mine = await api.listRatings({ raterId: "expert-9" });
    expect(mine).toHaveLength(1);
  });

  it("maps error responses to ApiError with the server detail", async () => {
    const missing = api.getExplanation("nope");
    await expect(missing).rejects.toBeInstanceOf(ApiError);
    await expect(missing).rejects.toMatchObject({ status: 404 });

    await expect(
      api.submitRating("expert-9", { explanationId: "out-t-0", metric: "correctness", value: 3 }),
    ).rejects.toMatchObject({ status: 422 });
  });

  it("propagates network failures from the injected fetch", async () => {
    const broken = new ApiClient("http://127.0.0.1:1", () =>
      Promise.reject(new TypeError("connection refused")),
    );
    await expect(broken.aggregate()).rejects.toBeInstanceOf(TypeError);
  });
});
