/** DOM rendering for the expert question panel.
 *
 * Every answer the service receives corresponds to a click on one of the
 * buttons rendered here; the view never submits on its own. Buttons
 * disable themselves on first click and the controller drops repeats, so
 * double-clicks record a single answer.
 */

import { HistoryEntry, QueryView, ResultResponse, VariableView } from "./api.js";
import { AnswerChoice } from "./api.js";

const EXISTENCE_GUIDANCE =
  "Reject only if there is no plausible causal link, direct or indirect.";

export type SubmitHandler = (choice: AnswerChoice) => Promise<boolean>;

export class PanelView {
  private notice: HTMLElement;
  private status: HTMLElement;
  private panel: HTMLElement;
  private historyList: HTMLElement;

  constructor(private readonly root: HTMLElement, private readonly onSubmit: SubmitHandler) {
    this.root.innerHTML = "";
    this.notice = el("div", "notice");
    this.notice.hidden = true;
    this.status = el("div", "status");
    this.panel = el("section", "panel");
    this.historyList = el("ol", "history");
    const historyBox = el("section", "history-box");
    historyBox.append(heading("h2", "Previous answers"), this.historyList);
    this.root.append(this.notice, this.status, this.panel, historyBox);
  }

  showNotice(message: string): void {
    this.notice.hidden = false;
    this.notice.textContent = message;
  }

  clearNotice(): void {
    this.notice.hidden = true;
    this.notice.textContent = "";
  }

  showIdle(status: string): void {
    this.status.textContent = `session ${status}`;
    this.panel.innerHTML = "";
    const idle = el("p", "idle");
    idle.textContent = "Waiting for the next question…";
    this.panel.append(idle);
  }

  showQuery(query: QueryView, history: HistoryEntry[]): void {
    this.status.textContent = "your answer is needed";
    this.renderHistory(history);
    this.panel.innerHTML = "";
    this.panel.dataset.queryId = String(query.query_id);
    this.panel.dataset.kind = query.kind;

    if (query.kind === "existence") {
      this.panel.append(
        heading("h2", "Is there a causal relationship?"),
        paragraph(
          `Could '${query.x.name}' and '${query.y.name}' be causally related, ` +
          "directly or indirectly, in either direction?"),
        this.variableCard(query.x),
        this.variableCard(query.y),
        this.contextLine(query),
        paragraph(EXISTENCE_GUIDANCE, "guidance"),
        this.buttonRow([
          { label: "Accept connection", testId: "accept", choice: { accept: true } },
          { label: "Reject connection", testId: "reject", choice: { accept: false } },
        ]),
      );
      return;
    }
    this.panel.append(
      heading("h2", "Which causal direction is more plausible?"),
      paragraph("Causation may be direct or indirect (via mediators)."),
      this.variableCard(query.x),
      this.variableCard(query.y),
      this.contextLine(query),
      this.buttonRow([
        {
          label: `A: '${query.x.name}' causes '${query.y.name}'`,
          testId: "orient-xy",
          choice: { parent: query.x.name, child: query.y.name },
        },
        {
          label: `B: '${query.y.name}' causes '${query.x.name}'`,
          testId: "orient-yx",
          choice: { parent: query.y.name, child: query.x.name },
        },
      ]),
    );
  }

  showFinished(result: ResultResponse): void {
    this.status.textContent = "session finished";
    this.panel.innerHTML = "";
    const edges = result.graph.edges.map(([s, t, mark]) => `${s} ${mark} ${t}`);
    const download = el("a", "download") as HTMLAnchorElement;
    download.textContent = "Download consensus graph (JSON)";
    download.download = "consensus.json";
    download.href =
      "data:application/json;charset=utf-8," +
      encodeURIComponent(JSON.stringify(result.graph, null, 2));
    const list = el("ul", "edges");
    for (const edge of edges) {
      const item = el("li");
      item.textContent = edge;
      list.append(item);
    }
    this.panel.append(
      heading("h2", "Consensus graph"),
      paragraph(`${edges.length} edges; expert calls: ${result.expert_calls.total}`),
      list,
      download,
    );
    if (result.metrics) {
      this.panel.append(paragraph(
        `scores: bsf ${fmt(result.metrics.bsf)}, f1 ${fmt(result.metrics.f1)}, ` +
        `shd ${fmt(result.metrics.shd)}`, "metrics"));
    }
  }

  showTerminal(status: string): void {
    this.status.textContent = `session ${status}`;
    this.panel.innerHTML = "";
    this.panel.append(paragraph(
      status === "timed_out"
        ? "The session timed out waiting for an answer."
        : "The session failed.", "terminal"));
  }

  private renderHistory(history: HistoryEntry[]): void {
    this.historyList.innerHTML = "";
    for (const entry of history) {
      const item = el("li");
      const answer = "accept" in entry.answer
        ? (entry.answer.accept ? "accepted" : "rejected")
        : `${entry.answer.parent} -> ${entry.answer.child}`;
      item.textContent = `${entry.kind} (${entry.pair.join(", ")}): ${answer}`;
      this.historyList.append(item);
    }
  }

  private variableCard(variable: VariableView): HTMLElement {
    const card = el("div", "variable");
    const name = el("strong");
    name.textContent = `'${variable.name}'`;
    const values = variable.values ? variable.values.join(", ") : "unknown";
    const description = variable.description ?? "unknown";
    const detail = el("span");
    detail.textContent = `: possible values ${values}; described as ${description}`;
    card.append(name, detail);
    return card;
  }

  private contextLine(query: QueryView): HTMLElement {
    const parts: string[] = [];
    if (query.connection_share !== undefined) {
      parts.push(
        `${query.connection_count} of ${query.n_models} models propose this connection ` +
        `(${percent(query.connection_share)})`);
    }
    if (query.kind === "orientation" && query.oriented_share_xy !== undefined) {
      parts.push(
        `direction support: ${percent(query.oriented_share_xy)} for ` +
        `'${query.x.name}' -> '${query.y.name}', ${percent(query.oriented_share_yx ?? 0)} ` +
        `for '${query.y.name}' -> '${query.x.name}'`);
    }
    return paragraph(parts.join("; "), "context");
  }

  private buttonRow(
    buttons: { label: string; testId: string; choice: AnswerChoice }[],
  ): HTMLElement {
    const row = el("div", "buttons");
    for (const spec of buttons) {
      const button = el("button") as HTMLButtonElement;
      button.textContent = spec.label;
      button.dataset.testid = spec.testId;
      button.addEventListener("click", () => {
        for (const sibling of Array.from(row.querySelectorAll("button"))) {
          (sibling as HTMLButtonElement).disabled = true;
        }
        void this.onSubmit(spec.choice).then((recorded) => {
          if (!recorded) {
            for (const sibling of Array.from(row.querySelectorAll("button"))) {
              (sibling as HTMLButtonElement).disabled = false;
            }
          }
        });
      });
      row.append(button);
    }
    return row;
  }
}

function el(tag: string, className?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  return node;
}

function heading(tag: string, text: string): HTMLElement {
  const node = el(tag);
  node.textContent = text;
  return node;
}

function paragraph(text: string, className?: string): HTMLElement {
  const node = el("p", className);
  node.textContent = text;
  return node;
}

function percent(share: number): string {
  return `${Math.round(share * 100)}%`;
}

function fmt(value: unknown): string {
  return typeof value === "number" ? value.toFixed(3) : String(value);
}
