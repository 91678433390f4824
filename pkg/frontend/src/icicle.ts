/**
 * Horizontal icicle plot of the class hierarchy, laid along the vertical
 * axis so rows line up with the matrix / response map class order.
 * Rectangle heights are proportional to class counts; colors encode a
 * group metric or a comparison delta.
 */

import { deltaColor, metricColor } from './color.js';
import type { HierarchyNodePayload, HierarchyPayload } from './types.js';

export type ChildSort = 'none' | 'size' | 'value';

export interface IcicleRect {
  groupId: number;
  label: string;
  depth: number;
  y: number;
  height: number;
  size: number;
  value: number | null;
  classId: number | null;
  color: string;
}

export interface IcicleLayout {
  rects: IcicleRect[];
  depth: number;
  /** class ids in the vertical order the layout produced */
  leafOrder: number[];
}

export interface IcicleOptions {
  totalHeight: number;
  sortChildren?: ChildSort;
  /** color rectangles by metric value or by delta (negative = red) */
  coloring?: 'metric' | 'delta' | 'none';
  /** delta per group_id, used when coloring === 'delta' */
  deltas?: Map<number, number>;
}

export function computeIcicleLayout(payload: HierarchyPayload,
                                    options: IcicleOptions): IcicleLayout {
  const rects: IcicleRect[] = [];
  const leafOrder: number[] = [];
  const sort = options.sortChildren ?? 'none';
  const coloring = options.coloring ?? (payload.metric ? 'metric' : 'none');
  const unit = options.totalHeight / payload.root.size;
  let maxDepth = 0;

  const colorOf = (node: HierarchyNodePayload): string => {
    if (coloring === 'delta') {
      const d = options.deltas?.get(node.group_id);
      return d === undefined ? '#f2f2f2' : deltaColor(d);
    }
    if (coloring === 'metric' && typeof node.value === 'number') {
      return metricColor(node.value);
    }
    return '#f2f2f2';
  };

  const walk = (node: HierarchyNodePayload, depth: number, y: number): number => {
    maxDepth = Math.max(maxDepth, depth);
    rects.push({
      groupId: node.group_id,
      label: node.label,
      depth,
      y,
      height: node.size * unit,
      size: node.size,
      value: typeof node.value === 'number' ? node.value : null,
      classId: node.class_id ?? null,
      color: colorOf(node),
    });
    if (node.class_id !== undefined) {
      leafOrder.push(node.class_id);
      return y + node.size * unit;
    }
    let children = node.children ?? [];
    if (sort === 'size') {
      children = [...children].sort((a, b) => b.size - a.size);
    } else if (sort === 'value') {
      children = [...children].sort((a, b) => (b.value ?? 0) - (a.value ?? 0));
    }
    let cursor = y;
    for (const child of children) cursor = walk(child, depth + 1, cursor);
    return y + node.size * unit;
  };

  walk(payload.root, 0, 0);
  return { rects, depth: maxDepth, leafOrder };
}

export interface IcicleHandlers {
  onSelect?: (groupId: number) => void;
  onHover?: (rect: IcicleRect | null) => void;
}

/** Render the layout as absolutely positioned divs inside the container. */
export function renderIcicle(container: HTMLElement, layout: IcicleLayout,
                             columnWidth: number,
                             handlers: IcicleHandlers = {}): void {
  container.textContent = '';
  container.style.position = 'relative';
  container.style.width = `${(layout.depth + 1) * columnWidth}px`;
  for (const rect of layout.rects) {
    const div = document.createElement('div');
    div.className = 'icicle-rect';
    div.style.position = 'absolute';
    div.style.left = `${rect.depth * columnWidth}px`;
    div.style.top = `${rect.y}px`;
    div.style.width = `${columnWidth - 1}px`;
    div.style.height = `${Math.max(rect.height - 1, 1)}px`;
    div.style.background = rect.color;
    div.dataset.groupId = String(rect.groupId);
    div.title = rect.value === null
      ? `${rect.label} (${rect.size})`
      : `${rect.label} (${rect.size}) — ${rect.value.toFixed(3)}`;
    if (rect.height > 12) {
      div.textContent = rect.label;
    }
    div.addEventListener('click', () => handlers.onSelect?.(rect.groupId));
    div.addEventListener('mouseenter', () => handlers.onHover?.(rect));
    div.addEventListener('mouseleave', () => handlers.onHover?.(null));
    container.appendChild(div);
  }
}
