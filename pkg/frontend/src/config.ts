// Runtime configuration. The bundle is static; the one deploy-time knob is
// where the service lives, read from config.json next to index.html.
// An empty serviceUrl means "same origin", which is the common case when
// the service itself serves the bundle under /ui.

export interface UiConfig {
  serviceUrl: string;
}

export const DEFAULT_CONFIG: UiConfig = { serviceUrl: '' };

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export async function loadConfig(fetchLike: FetchLike = fetch): Promise<UiConfig> {
  try {
    const response = await fetchLike('./config.json');
    if (!response.ok) return DEFAULT_CONFIG;
    const raw: unknown = await response.json();
    if (raw !== null && typeof raw === 'object' && 'serviceUrl' in raw) {
      const url = (raw as { serviceUrl: unknown }).serviceUrl;
      if (typeof url === 'string') return { serviceUrl: url.replace(/\/$/, '') };
    }
    return DEFAULT_CONFIG;
  } catch {
    return DEFAULT_CONFIG;
  }
}
