/**
 * DOM rendering of the lifecycle map: one tile per step, colored and
 * pattern-overlaid from the pure tile model, with the API's coverage figure
 * shown verbatim. Clicking a tile opens the assessment editor callback.
 */

import { AuditDoc, CoverageDoc } from "./api.js";
import { PhaseTiles, StepTile, buildTiles, coverageLabel } from "./colors.js";

export interface MapCallbacks {
  onSelectStep: (tile: StepTile) => void;
}

export function renderLifecycleMap(
  root: HTMLElement,
  audit: AuditDoc,
  coverage: CoverageDoc,
  callbacks: MapCallbacks,
): void {
  root.innerHTML = "";
  const phases: PhaseTiles[] = buildTiles(audit.model);

  const heading = document.createElement("div");
  heading.className = "coverage-line";
  heading.textContent = `Audit coverage: ${coverageLabel(coverage.overall)}`;
  root.appendChild(heading);

  for (const phase of phases) {
    const section = document.createElement("section");
    section.className = "phase";

    const title = document.createElement("h3");
    const phaseCoverage = coverage.per_phase[phase.phaseId];
    title.textContent = `${phase.title} (${coverageLabel(phaseCoverage?.fraction ?? null)})`;
    section.appendChild(title);

    const grid = document.createElement("div");
    grid.className = "tile-grid";
    for (const tile of phase.tiles) {
      const button = document.createElement("button");
      button.className = `tile tile-${tile.color} pattern-${tile.pattern}`;
      button.dataset.stepId = tile.stepId;
      button.dataset.color = tile.color;
      button.title = tile.rationale || tile.status;
      const label = document.createElement("span");
      label.textContent = tile.title;
      button.appendChild(label);
      if (tile.owner) {
        const owner = document.createElement("small");
        owner.textContent = tile.owner;
        button.appendChild(owner);
      }
      button.addEventListener("click", () => callbacks.onSelectStep(tile));
      grid.appendChild(button);
    }
    section.appendChild(grid);
    root.appendChild(section);
  }
}

export function renderOfflineBanner(root: HTMLElement, visible: boolean): void {
  let banner = root.querySelector<HTMLElement>(".offline-banner");
  if (!visible) {
    banner?.remove();
    return;
  }
  if (!banner) {
    banner = document.createElement("div");
    banner.className = "offline-banner";
    banner.textContent =
      "Service unreachable — showing the last loaded state, editing disabled.";
    root.prepend(banner);
  }
}
