import { ReviewClient } from "./api.js";
import { describe } from "./descriptions.js";
import { OfflineQueue } from "./queue.js";
import { ReviewSession } from "./state.js";

const SCORES = [1, 2, 3, 4, 5];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function fillScoreSelect(select: HTMLSelectElement): void {
  select.innerHTML = "";
  const blank = document.createElement("option");
  blank.value = "";
  blank.textContent = "-";
  select.appendChild(blank);
  for (const s of SCORES) {
    const opt = document.createElement("option");
    opt.value = String(s);
    opt.textContent = String(s);
    select.appendChild(opt);
  }
}

async function boot(): Promise<void> {
  const params = new URLSearchParams(location.search);
  const baseUrl = params.get("service") ?? "";
  const reviewerId = params.get("reviewer") ?? "anonymous";
  const client = new ReviewClient(baseUrl);
  const queue = new OfflineQueue(window.localStorage);
  const prototypes = await client.fetchAllPrototypes();
  const session = new ReviewSession(prototypes, reviewerId);

  const image = el<HTMLImageElement>("render");
  const heading = el<HTMLElement>("class-heading");
  const progress = el<HTMLElement>("progress");
  const banner = el<HTMLElement>("banner");
  const repSelect = el<HTMLSelectElement>("rep");
  const claritySelect = el<HTMLSelectElement>("clarity");
  const excludeBox = el<HTMLInputElement>("exclude");
  const submitBtn = el<HTMLButtonElement>("submit");
  fillScoreSelect(repSelect);
  fillScoreSelect(claritySelect);

  function refresh(): void {
    const proto = session.current;
    const draft = session.draft(proto.prototype_id);
    image.src = client.renderUrl(proto);
    heading.textContent = `${proto.class_code} - ${describe(proto.class_code)}`;
    repSelect.value = draft.representativeness?.toString() ?? "";
    claritySelect.value = draft.clarity?.toString() ?? "";
    excludeBox.checked = draft.excluded;
    submitBtn.disabled = !session.canSubmit();
    const p = session.progress();
    progress.textContent = `${p.rated} / ${p.total} rated`;
  }

  repSelect.addEventListener("change", () => {
    if (repSelect.value) session.setScore("representativeness", Number(repSelect.value));
    refresh();
  });
  claritySelect.addEventListener("change", () => {
    if (claritySelect.value) session.setScore("clarity", Number(claritySelect.value));
    refresh();
  });
  excludeBox.addEventListener("change", () => {
    session.toggleExcluded();
    refresh();
  });

  async function submit(): Promise<void> {
    const outcome = await session.submitCurrent(client, queue);
    if (outcome === "queued") {
      banner.textContent = "offline: submission queued, will retry on reconnect";
      banner.hidden = false;
    } else if (outcome === "advanced") {
      banner.hidden = true;
    }
    refresh();
  }

  submitBtn.addEventListener("click", () => void submit());
  el<HTMLButtonElement>("prev").addEventListener("click", () => {
    session.prev();
    refresh();
  });
  el<HTMLButtonElement>("next").addEventListener("click", () => {
    session.next();
    refresh();
  });

  // keyboard shortcuts: 1-5 sets representativeness, shift+1-5 clarity,
  // x toggles exclusion, enter submits
  document.addEventListener("keydown", (ev) => {
    if (ev.key >= "1" && ev.key <= "5") {
      session.setScore(ev.shiftKey ? "clarity" : "representativeness", Number(ev.key));
      refresh();
    } else if (ev.key === "x") {
      session.toggleExcluded();
      refresh();
    } else if (ev.key === "Enter" && session.canSubmit()) {
      void submit();
    }
  });

  window.addEventListener("online", () => {
    void session.flushQueue(client, queue).then((n) => {
      if (n > 0) banner.hidden = true;
      refresh();
    });
  });

  refresh();
}

void boot();
