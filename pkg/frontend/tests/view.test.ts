import { beforeEach, describe, expect, it } from "vitest";

import { AnswerChoice } from "../src/api.js";
import { PanelView } from "../src/view.js";
import { emptyResult, existenceQuery, orientationQuery } from "./fakes.js";

function mount(onSubmit?: (choice: AnswerChoice) => Promise<boolean>) {
  const root = document.createElement("div");
  document.body.append(root);
  const submissions: AnswerChoice[] = [];
  const view = new PanelView(root, async (choice) => {
    submissions.push(choice);
    if (onSubmit) {
      return onSubmit(choice);
    }
    return true;
  });
  return { root, view, submissions };
}

beforeEach(() => {
  document.body.innerHTML = "";
});

describe("PanelView", () => {
  it("renders existence queries with guidance and both verdict buttons", () => {
    const { root, view } = mount();
    view.showQuery(existenceQuery(1), []);
    expect(root.textContent).toContain("no plausible causal link, direct or indirect");
    expect(root.textContent).toContain("possible values yes, no");
    expect(root.textContent).toContain("described as unknown");
    expect(root.querySelector("[data-testid=accept]")).toBeTruthy();
    expect(root.querySelector("[data-testid=reject]")).toBeTruthy();
  });

  it("renders orientation queries as two directional choices", () => {
    const { root, view } = mount();
    view.showQuery(orientationQuery(2), []);
    const a = root.querySelector("[data-testid=orient-xy]") as HTMLButtonElement;
    const b = root.querySelector("[data-testid=orient-yx]") as HTMLButtonElement;
    expect(a.textContent).toContain("A: 'a' causes 'b'");
    expect(b.textContent).toContain("B: 'b' causes 'a'");
    expect(root.textContent).toContain("2 of 4 models propose this connection (50%)");
  });

  it("submits the clicked choice and disables buttons after the click", async () => {
    const { root, view, submissions } = mount();
    view.showQuery(existenceQuery(3), []);
    const accept = root.querySelector("[data-testid=accept]") as HTMLButtonElement;
    const reject = root.querySelector("[data-testid=reject]") as HTMLButtonElement;
    accept.click();
    expect(accept.disabled).toBe(true);
    expect(reject.disabled).toBe(true);
    accept.click(); // disabled: browsers do not dispatch, nothing recorded
    await Promise.resolve();
    expect(submissions).toEqual([{ accept: true }]);
  });

  it("re-enables buttons when a submission is not recorded", async () => {
    const { root, view } = mount(async () => false);
    view.showQuery(orientationQuery(4), []);
    const button = root.querySelector("[data-testid=orient-xy]") as HTMLButtonElement;
    button.click();
    await new Promise((resolve) => setTimeout(resolve, 0));
    expect(button.disabled).toBe(false);
  });

  it("renders history entries", () => {
    const { root, view } = mount();
    view.showQuery(existenceQuery(5), [
      {
        query_id: 1, kind: "orientation", pair: ["a", "b"],
        answer: { parent: "a", child: "b" }, timestamp: 0,
      },
      {
        query_id: 2, kind: "existence", pair: ["b", "c"],
        answer: { accept: false }, timestamp: 0,
      },
    ]);
    const items = Array.from(root.querySelectorAll(".history li"));
    expect(items.map((item) => item.textContent)).toEqual([
      "orientation (a, b): a -> b",
      "existence (b, c): rejected",
    ]);
  });

  it("shows the finished screen with a download link", () => {
    const { root, view } = mount();
    view.showFinished({
      ...emptyResult,
      graph: { variables: [], edges: [["a", "b", "->"]] },
      expert_calls: { existence_calls: 1, orientation_calls: 2, total: 3 },
    });
    expect(root.textContent).toContain("1 edges; expert calls: 3");
    expect(root.textContent).toContain("a -> b");
    const link = root.querySelector("a.download") as HTMLAnchorElement;
    expect(link.href).toContain("data:application/json");
  });

  it("shows terminal screens", () => {
    const { root, view } = mount();
    view.showTerminal("timed_out");
    expect(root.textContent).toContain("timed out");
  });
});
