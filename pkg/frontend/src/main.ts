/** DOM bootstrap: wires the controller to the static page. */

import { ApiClient } from "./api.js";
import { t } from "./i18n.js";
import { AppStore } from "./state.js";
import { Dashboard, appTitle } from "./controller.js";

declare global {
  interface Window {
    FINFACT_API_BASE?: string;
  }
}

function byId<T extends HTMLElement>(id: string): T {
  const element = document.getElementById(id);
  if (element === null) {
    throw new Error(`missing #${id}`);
  }
  return element as T;
}

function apply(markup: string | null, mount: HTMLElement): void {
  if (markup !== null) {
    mount.innerHTML = markup; // null means the response arrived stale
  }
}

async function boot(): Promise<void> {
  const client = new ApiClient(window.FINFACT_API_BASE ?? "");
  const store = new AppStore();
  const dashboard = new Dashboard(store, client);

  const mount = byId<HTMLElement>("board");
  const form = byId<HTMLFormElement>("search-form");
  const input = byId<HTMLInputElement>("search-input");
  const submit = byId<HTMLButtonElement>("search-submit");
  const clear = byId<HTMLButtonElement>("search-clear");
  const toggle = byId<HTMLButtonElement>("lang-toggle");
  const heading = byId<HTMLElement>("title");

  const syncChrome = (): void => {
    const lang = store.state.language;
    heading.textContent = appTitle(dashboard);
    input.placeholder = t(lang, "search_placeholder");
    submit.textContent = t(lang, "search");
    clear.textContent = t(lang, "clear");
    toggle.textContent = t(lang, "toggle_language");
    submit.disabled = input.value.trim() === ""; // an empty query is never sent
  };

  input.addEventListener("input", syncChrome);

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    void dashboard.runSearch(input.value).then((markup) => apply(markup, mount));
  });

  clear.addEventListener("click", () => {
    input.value = "";
    syncChrome();
    apply(dashboard.clearSearch(), mount);
  });

  toggle.addEventListener("click", () => {
    apply(dashboard.toggleLanguage(), mount); // re-render only, no refetch
    syncChrome();
  });

  mount.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (target.dataset["action"] !== "factcheck") {
      return;
    }
    const card = target.closest<HTMLElement>("[data-article-id]");
    const article = card && dashboard.findArticle(card.dataset["articleId"] ?? "");
    if (article) {
      const settled = dashboard.requestBadge(article); // marks the badge pending synchronously
      apply(dashboard.render(), mount); // paint the pending badge while the request runs
      void settled.then((markup) => apply(markup, mount));
    }
  });

  syncChrome();
  apply(await dashboard.loadEvents(), mount);
}

void boot();
