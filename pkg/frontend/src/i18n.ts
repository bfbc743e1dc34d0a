/** Static UI string table; article text itself follows the language toggle. */

export type Lang = "en" | "zh";

const STRINGS = {
  en: {
    app_title: "finfact — event board",
    search_placeholder: "Search hashtags and content…",
    search: "Search",
    clear: "Clear",
    toggle_language: "中文",
    empty_board: "No events yet.",
    empty_search: "No matching events.",
    error_prefix: "Error",
    event: "Event",
    hashtags: "hashtags",
    check: "check",
    checking: "checking…",
    credible: "credible",
    doubtful: "doubtful",
    model_unavailable: "model unavailable",
  },
  zh: {
    app_title: "finfact — 事件看板",
    search_placeholder: "搜索标签和内容…",
    search: "搜索",
    clear: "清除",
    toggle_language: "English",
    empty_board: "暂无事件。",
    empty_search: "没有匹配的事件。",
    error_prefix: "错误",
    event: "事件",
    hashtags: "标签",
    check: "核查",
    checking: "核查中…",
    credible: "可信",
    doubtful: "存疑",
    model_unavailable: "模型不可用",
  },
} as const;

export type StringKey = keyof (typeof STRINGS)["en"];

export function t(lang: Lang, key: StringKey): string {
  return STRINGS[lang][key];
}
